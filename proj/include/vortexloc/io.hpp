#pragma once

#include <cstdint>
#include <deque>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vortexloc/config.hpp"
#include "vortexloc/errors.hpp"
#include "vortexloc/localization.hpp"
#include "vortexloc/meanfield.hpp"
#include "vortexloc/noise.hpp"

namespace vortexloc::io {

using Json = nlohmann::ordered_json;

inline constexpr const char* kToolVersion = "1.0.0";

/// Scan parameters shared by the subcommands; zero or empty means "derive".
struct ScanSettings {
  Antiblockade mode = Antiblockade::None;
  double r_max_um = 0.0;
  int samples = 401;
  std::optional<double> z_min_um;
  std::optional<double> z_max_um;
  int z_samples = 2001;
  std::vector<int> l_values{1, 2, 3, 4, 5};
  DeltaOffset offset = DeltaOffset::Calibrated;
  int map_points = 101;
  double map_half_um = 0.0;
  double eta = 1.0;
  double tolerance = 0.01;
  std::string axis = "radial";
  double range_um = 0.0;  // shift profile span, 0 selects 0.1 lambda_c (radial) or one period
  int range_samples = 11;
  int blockade_angles = 181;
  double r_um = 0.0;  // point evaluation
  double phi = 0.0;
  std::optional<double> z_um;
};

/// Everything a run needs, resolved from built-in defaults, the config file and flags.
struct RunSpec {
  RawConfig raw;
  std::optional<double> kappa;  // shorthand, overrides raw.omega_p0_mhz
  bool delta_auto = true;       // calibrate delta = Delta_c0 + s0 before running
  double extent_lambda = 100.0;
  double spacing_lambda = 0.01;
  MaskRadius mask = MaskRadius::Local;
  ScanSettings scan;
  NoiseSpec noise;
  double noise_std_input = 0.0;  // as given: relative (intensity) or MHz (frequency)

  SystemConfig config() const {
    RawConfig r = raw;
    if (kappa) {
      if (!(*kappa > 0.0)) throw ConfigError("kappa", "kappa must be positive");
      r.omega_p0_mhz = r.omega_c0_mhz / *kappa;
    }
    return make_config(r);
  }

  QuadratureSpec quadrature() const {
    QuadratureSpec q = QuadratureSpec::in_wavelengths(raw.wavelength_c_um, spacing_lambda, extent_lambda);
    q.validate();
    return q;
  }

  NoiseSpec noise_spec() const {
    NoiseSpec n = noise;
    n.std_dev = n.kind == NoiseKind::Intensity ? noise_std_input : kTwoPi * noise_std_input;
    n.validate();
    return n;
  }
};

namespace detail {

inline std::string line_of(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

/// Reads the members of one section, rejecting anything not listed.
class Section {
 public:
  Section(const Json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError(name_, "section must be an object");
  }

  template <class T>
  void read(const char* key, T& out) {
    seen_.push_back(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).template get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(name_ + "." + key, "wrong value type");
    }
  }

  bool has(const char* key) const { return j_.contains(key); }
  const Json& at(const char* key) {
    seen_.push_back(key);
    return j_.at(key);
  }
  void mark(const char* key) { seen_.push_back(key); }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (std::find(seen_.begin(), seen_.end(), k) == seen_.end()) {
        throw ConfigError(name_.empty() ? k : name_ + "." + k, "unknown key '" + k + "'");
      }
    }
  }

 private:
  const Json& j_;
  std::string name_;
  std::vector<std::string> seen_;
};

inline Antiblockade parse_mode(const std::string& s) {
  if (s == "none") return Antiblockade::None;
  if (s == "perfect") return Antiblockade::Perfect;
  if (s == "partial") return Antiblockade::Partial;
  throw ConfigError("scan.mode", "expected none, perfect or partial, got '" + s + "'");
}

inline DeltaOffset parse_offset(const std::string& s) {
  if (s == "calibrated") return DeltaOffset::Calibrated;
  if (s == "detuned") return DeltaOffset::Detuned;
  throw ConfigError("scan.offset", "expected calibrated or detuned, got '" + s + "'");
}

inline NoiseKind parse_kind(const std::string& s) {
  if (s == "intensity") return NoiseKind::Intensity;
  if (s == "frequency") return NoiseKind::Frequency;
  throw ConfigError("noise.kind", "expected intensity or frequency, got '" + s + "'");
}

inline MaskRadius parse_mask(const std::string& s) {
  if (s == "local") return MaskRadius::Local;
  if (s == "core") return MaskRadius::Core;
  throw ConfigError("quadrature.mask", "expected local or core, got '" + s + "'");
}

inline DetuningMode parse_detuning_mode(const std::string& s) {
  if (s == "standing-wave") return DetuningMode::StandingWave;
  if (s == "constant") return DetuningMode::Constant;
  throw ConfigError("detuning.mode", "expected standing-wave or constant, got '" + s + "'");
}

}  // namespace detail

inline Antiblockade parse_mode(const std::string& s) { return detail::parse_mode(s); }
inline DeltaOffset parse_offset(const std::string& s) { return detail::parse_offset(s); }
inline NoiseKind parse_kind(const std::string& s) { return detail::parse_kind(s); }
inline MaskRadius parse_mask(const std::string& s) { return detail::parse_mask(s); }

/// Applies a JSON configuration document on top of `spec`. Missing keys keep
/// their current values; unknown keys are errors naming the key.
inline void apply_config_text(const std::string& text, RunSpec& spec) {
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) return;  // empty file: all defaults
  Json doc;
  try {
    doc = Json::parse(text, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config", "parse error at " + detail::line_of(text, e.byte > 0 ? e.byte - 1 : 0));
  }
  if (doc.is_null()) return;
  detail::Section top(doc, "");

  if (top.has("kappa")) {
    double k = 0.0;
    top.read("kappa", k);
    spec.kappa = k;
  } else {
    top.mark("kappa");
  }

  auto section = [&](const char* name, auto&& body) {
    if (!doc.contains(name)) {
      top.mark(name);
      return;
    }
    detail::Section s(top.at(name), name);
    body(s);
    s.finish();
  };

  section("beam", [&](detail::Section& s) {
    s.read("omega_c0_mhz", spec.raw.omega_c0_mhz);
    s.read("waist_um", spec.raw.waist_um);
    s.read("winding_l", spec.raw.winding_l);
    s.read("wavelength_um", spec.raw.wavelength_c_um);
    s.read("radial_p", spec.raw.radial_p);
  });
  section("probe", [&](detail::Section& s) {
    if (s.has("omega_p0_mhz") && s.has("kappa")) {
      throw ConfigError("probe.kappa", "give either omega_p0_mhz or kappa, not both");
    }
    s.read("omega_p0_mhz", spec.raw.omega_p0_mhz);
    if (s.has("omega_p0_mhz")) spec.kappa.reset();
    if (s.has("kappa")) {
      double k = 0.0;
      s.read("kappa", k);
      spec.kappa = k;
    } else {
      s.mark("kappa");
    }
    s.read("delta_p_mhz", spec.raw.delta_p_mhz);
  });
  section("detuning", [&](detail::Section& s) {
    std::string mode = spec.raw.detuning_mode == DetuningMode::StandingWave ? "standing-wave" : "constant";
    s.read("mode", mode);
    spec.raw.detuning_mode = detail::parse_detuning_mode(mode);
    s.read("delta_c_mhz", spec.raw.delta_c_const_mhz);
    s.read("delta_c0_mhz", spec.raw.delta_c0_mhz);
    if (s.has("delta_mhz")) {
      const Json& d = s.at("delta_mhz");
      if (d.is_string() && d.get<std::string>() == "auto") {
        spec.delta_auto = true;
      } else if (d.is_number()) {
        spec.delta_auto = false;
        spec.raw.delta_shift_mhz = d.get<double>();
      } else {
        throw ConfigError("detuning.delta_mhz", "expected a number or \"auto\"");
      }
    } else {
      s.mark("delta_mhz");
    }
  });
  section("medium", [&](detail::Section& s) {
    s.read("gamma_e_mhz", spec.raw.gamma_e_mhz);
    s.read("gamma_r_mhz", spec.raw.gamma_r_mhz);
    s.read("density_um3", spec.raw.density_per_um3);
    s.read("c6_mhz_um6", spec.raw.c6_mhz_um6);
  });
  section("quadrature", [&](detail::Section& s) {
    s.read("extent_lambda", spec.extent_lambda);
    s.read("spacing_lambda", spec.spacing_lambda);
    std::string mask = spec.mask == MaskRadius::Local ? "local" : "core";
    s.read("mask", mask);
    spec.mask = detail::parse_mask(mask);
  });
  section("scan", [&](detail::Section& s) {
    ScanSettings& sc = spec.scan;
    std::string mode = to_string(sc.mode);
    s.read("mode", mode);
    sc.mode = detail::parse_mode(mode);
    s.read("r_max_um", sc.r_max_um);
    s.read("samples", sc.samples);
    if (s.has("z_min_um")) {
      double v = 0.0;
      s.read("z_min_um", v);
      sc.z_min_um = v;
    } else {
      s.mark("z_min_um");
    }
    if (s.has("z_max_um")) {
      double v = 0.0;
      s.read("z_max_um", v);
      sc.z_max_um = v;
    } else {
      s.mark("z_max_um");
    }
    s.read("z_samples", sc.z_samples);
    s.read("l_values", sc.l_values);
    std::string offset = to_string(sc.offset);
    s.read("offset", offset);
    sc.offset = detail::parse_offset(offset);
    s.read("map_points", sc.map_points);
    s.read("map_half_um", sc.map_half_um);
    s.read("eta", sc.eta);
    s.read("tolerance", sc.tolerance);
    s.read("axis", sc.axis);
    s.read("range_um", sc.range_um);
    s.read("range_samples", sc.range_samples);
    s.read("blockade_angles", sc.blockade_angles);
  });
  section("noise", [&](detail::Section& s) {
    std::string kind = to_string(spec.noise.kind);
    s.read("kind", kind);
    spec.noise.kind = detail::parse_kind(kind);
    s.read("std", spec.noise_std_input);
    s.read("trajectories", spec.noise.trajectories);
    s.read("seed", spec.noise.seed);
    s.read("correlation_length_um", spec.noise.correlation_length);
  });
  top.finish();
}

inline void apply_config_file(const std::string& path, RunSpec& spec) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  apply_config_text(buf.str(), spec);
}

/// Resolved configuration echoed into every output, in configuration units.
inline Json manifest_config(const RunSpec& spec, const SystemConfig& c) {
  Json j;
  j["beam"] = {{"omega_c0_mhz", c.beam.omega_c0.mhz()},
               {"waist_um", c.beam.waist_w0},
               {"winding_l", c.beam.winding_l},
               {"wavelength_um", c.beam.wavelength_c},
               {"radial_p", c.beam.radial_p}};
  j["probe"] = {{"omega_p0_mhz", c.probe.omega_p0.mhz()}, {"delta_p_mhz", c.probe.delta_p.mhz()},
                {"kappa", kappa(c)}};
  j["detuning"] = {{"mode", c.detuning.mode == DetuningMode::StandingWave ? "standing-wave" : "constant"},
                   {"delta_c_mhz", c.detuning.delta_c_const.mhz()},
                   {"delta_c0_mhz", c.detuning.delta_c0.mhz()},
                   {"delta_mhz", c.detuning.delta_shift.mhz()},
                   {"delta_auto", spec.delta_auto}};
  j["medium"] = {{"gamma_e_mhz", c.medium.gamma_e.mhz()},
                 {"gamma_r_mhz", c.medium.gamma_r.mhz()},
                 {"density_um3", c.medium.density_rho},
                 {"c6_mhz_um6", c.medium.c6 / kTwoPi}};
  j["quadrature"] = {{"extent_lambda", spec.extent_lambda},
                     {"spacing_lambda", spec.spacing_lambda},
                     {"mask", spec.mask == MaskRadius::Local ? "local" : "core"}};
  j["fingerprint"] = fingerprint(c);
  return j;
}

// ---------------------------------------------------------------------------
// Tabular output

struct Column {
  std::string name;
  std::string unit;
  std::vector<double> values;
};

struct Table {
  std::deque<Column> columns;  // add() hands out references that must survive later adds

  Column& add(std::string name, std::string unit) {
    columns.push_back({std::move(name), std::move(unit), {}});
    return columns.back();
  }
};

/// Shortest round-trip decimal form, so equal doubles print equal bytes.
inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_csv(std::ostream& os, const Json& manifest, const Table& t) {
  os << "# manifest: " << manifest.dump() << '\n';
  os << '#';
  for (std::size_t i = 0; i < t.columns.size(); ++i) {
    os << (i ? "," : " ") << t.columns[i].name << " [" << t.columns[i].unit << ']';
  }
  os << '\n';
  const std::size_t rows = t.columns.empty() ? 0 : t.columns.front().values.size();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < t.columns.size(); ++i) {
      if (i) os << ',';
      os << format_number(t.columns[i].values.at(r));
    }
    os << '\n';
  }
}

inline void write_json(std::ostream& os, const Json& manifest, const Table& t) {
  Json doc;
  doc["manifest"] = manifest;
  Json cols = Json::array();
  for (const Column& c : t.columns) cols.push_back({{"name", c.name}, {"unit", c.unit}, {"values", c.values}});
  doc["columns"] = cols;
  os << doc.dump(1) << '\n';
}

}  // namespace vortexloc::io
