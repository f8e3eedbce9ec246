// vortex-localize: command-line front end for the vortexloc library.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "vortexloc/io.hpp"

namespace vl = vortexloc;
namespace io = vortexloc::io;

namespace {

struct Flags {
  std::string config_path;
  std::string out_path;
  std::string format = "csv";
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  std::optional<double> kappa;
  std::optional<double> grid_spacing;
  std::optional<double> extent;
  std::optional<std::string> mask;
  std::optional<std::string> delta;
  std::optional<int> winding_l;
  std::optional<double> waist;
  std::optional<std::string> mode;
  std::optional<double> r_max;
  std::optional<int> samples;
  std::optional<double> z_min;
  std::optional<double> z_max;
  std::optional<std::vector<int>> l_values;
  std::optional<std::string> offset;
  std::optional<int> map_points;
  std::optional<double> map_half;
  std::optional<double> eta;
  std::optional<double> tolerance;
  std::optional<std::string> axis;
  std::optional<double> range;
  std::optional<int> range_samples;
  std::optional<std::string> kind;
  std::optional<double> std_dev;
  std::optional<int> trajectories;
  std::optional<double> r;
  std::optional<double> z;
  std::optional<double> phi;
};

void apply_flags(const Flags& f, io::RunSpec& spec) {
  if (f.kappa) spec.kappa = *f.kappa;
  if (f.grid_spacing) spec.spacing_lambda = *f.grid_spacing;
  if (f.extent) spec.extent_lambda = *f.extent;
  if (f.mask) spec.mask = io::parse_mask(*f.mask);
  if (f.delta) {
    if (*f.delta == "auto") {
      spec.delta_auto = true;
    } else {
      try {
        spec.raw.delta_shift_mhz = std::stod(*f.delta);
      } catch (const std::exception&) {
        throw vl::ConfigError("--delta", "expected a number in MHz or 'auto'");
      }
      spec.delta_auto = false;
    }
  }
  if (f.winding_l) spec.raw.winding_l = *f.winding_l;
  if (f.waist) spec.raw.waist_um = *f.waist;
  auto& sc = spec.scan;
  if (f.mode) sc.mode = io::parse_mode(*f.mode);
  if (f.r_max) sc.r_max_um = *f.r_max;
  if (f.samples) {
    sc.samples = *f.samples;
    sc.z_samples = *f.samples;
  }
  if (f.z_min) sc.z_min_um = *f.z_min;
  if (f.z_max) sc.z_max_um = *f.z_max;
  if (f.l_values) sc.l_values = *f.l_values;
  if (f.offset) sc.offset = io::parse_offset(*f.offset);
  if (f.map_points) sc.map_points = *f.map_points;
  if (f.map_half) sc.map_half_um = *f.map_half;
  if (f.eta) sc.eta = *f.eta;
  if (f.tolerance) sc.tolerance = *f.tolerance;
  if (f.axis) sc.axis = *f.axis;
  if (f.range) sc.range_um = *f.range;
  if (f.range_samples) sc.range_samples = *f.range_samples;
  if (f.r) sc.r_um = *f.r;
  if (f.z) sc.z_um = *f.z;
  if (f.phi) sc.phi = *f.phi;
  if (f.kind) spec.noise.kind = io::parse_kind(*f.kind);
  if (f.std_dev) spec.noise_std_input = *f.std_dev;
  if (f.trajectories) spec.noise.trajectories = *f.trajectories;
  if (f.seed) spec.noise.seed = *f.seed;
}

void progress(const std::string& msg) { std::cerr << "[vortex-localize] " << msg << std::endl; }

struct Result {
  io::Table table;
  io::Json summary;
  std::string line;
  std::vector<std::pair<std::string, std::string>> sidecars;  // suffix, content
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

class Runner {
 public:
  Runner(const io::RunSpec& spec, unsigned threads)
      : spec_(spec), config_(spec.config()), quad_(spec.quadrature()) {
    mf_.mask = spec.mask;
    mf_.parallelism.threads = threads;
    par_.threads = threads;
  }

  const vl::SystemConfig& config() const { return config_; }

  /// Applies the detuning calibration if requested and returns the shift at the
  /// localized point.
  vl::AngularFrequency resolve_delta() {
    const bool sw = config_.detuning.mode == vl::DetuningMode::StandingWave;
    if (spec_.delta_auto) {
      progress("calibrating detuning on the quadrature lattice");
      if (sw) {
        const vl::Calibration cal = vl::calibrate_delta_full(config_, quad_, mf_);
        config_.detuning.delta_shift = cal.delta;
        return cal.shift;
      }
      const vl::Calibration cal = vl::calibrate_constant_detuning(config_, quad_, mf_);
      config_.detuning.delta_c_const = cal.delta;
      return cal.shift;
    }
    return vl::shift_at(vl::Position{0.0, 0.0, vl::localized_z(config_)}, config_, quad_, mf_);
  }

  Result steady() {
    resolve_delta();
    const auto& sc = spec_.scan;
    const vl::Position p = vl::Position::cylindrical(sc.r_um, sc.phi, sc.z_um.value_or(vl::localized_z(config_)));
    const vl::AngularFrequency s = vl::shift_at(p, config_, quad_, mf_);
    const vl::LocalDrive d = vl::make_drive(config_, p, s);
    const double sigma = vl::steady_sigma_rr(d);
    const vl::AngularFrequency w = vl::linewidth_w(d);
    Result res;
    res.table.add("r", "um").values = {p.r};
    res.table.add("z", "um").values = {p.z};
    res.table.add("eta", "1").values = {vl::intensity_ratio_eta(p, config_)};
    res.table.add("shift", "MHz").values = {s.mhz()};
    res.table.add("linewidth", "MHz").values = {w.mhz()};
    res.table.add("blockade_radius", "um").values = {vl::blockade_radius(w, config_.medium.c6)};
    res.table.add("sigma_rr", "1").values = {sigma};
    res.summary = {{"sigma_rr", sigma}, {"shift_mhz", s.mhz()}};
    res.line = "sigma_rr=" + fmt("%.6g", sigma) + " s/2pi=" + fmt("%.6g", s.mhz()) + " MHz";
    return res;
  }

  Result scan_r() {
    vl::TransverseScanOptions opt;
    opt.mode = spec_.scan.mode;
    opt.r_max = spec_.scan.r_max_um;
    opt.n_samples = spec_.scan.samples;
    opt.quadrature = quad_;
    opt.meanfield = mf_;
    opt.parallelism = par_;
    if (opt.mode != vl::Antiblockade::None) progress("evaluating the pointwise shift along the scan");
    const vl::ScanProfile p = vl::transverse_scan(config_, opt);
    Result res = profile_table(p);
    if (!p.shift_mhz.empty()) res.table.add("shift", "MHz").values = p.shift_mhz;
    return res;
  }

  Result scan_z() {
    const vl::AngularFrequency s0 = resolve_delta();
    const double lam = config_.beam.wavelength_c;
    const double zc = vl::localized_z(config_);
    const double lo = spec_.scan.z_min_um.value_or(zc - lam);
    const double hi = spec_.scan.z_max_um.value_or(zc + lam);
    const vl::ScanProfile p = vl::longitudinal_scan(config_, s0, lo, hi, spec_.scan.z_samples, par_);
    Result res = profile_table(p);
    const double analytic =
        vl::analytic_a_z(vl::core_linewidth(config_), config_.detuning.delta_c0, lam);
    res.summary["analytic_fwhm_um"] = analytic;
    res.summary["s0_mhz"] = s0.mhz();
    res.summary["peaks_um"] = vl::local_maxima(p);
    res.line += " analytic=" + fmt("%.6g", analytic * 1e3) + " nm";
    return res;
  }

  Result scan_l() {
    const auto widths = vl::oam_broadening_scan(config_, spec_.scan.l_values, spec_.scan.samples, par_);
    Result res;
    auto& l = res.table.add("winding_l", "1");
    auto& w = res.table.add("fwhm", "um");
    auto& wl = res.table.add("fwhm", "lambda_c");
    for (const auto& x : widths) {
      l.values.push_back(x.winding_l);
      w.values.push_back(x.fwhm);
      wl.values.push_back(x.fwhm / config_.beam.wavelength_c);
    }
    res.line = "fwhm(l=" + std::to_string(widths.back().winding_l) + ")=" + fmt("%.6g", widths.back().fwhm) + " um";
    res.summary = {{"l_values", spec_.scan.l_values}, {"fwhm_um", w.values}};
    return res;
  }

  Result map3d() {
    if (!spec_.delta_auto) throw vl::ConfigError("--delta", "map3d sets delta itself; use auto");
    const vl::AngularFrequency s0 = resolve_delta();
    vl::MapGrid grid = vl::default_map_grid(config_, spec_.scan.map_points);
    if (spec_.scan.map_half_um > 0.0) grid.half_x = grid.half_y = grid.half_z = spec_.scan.map_half_um;
    vl::Map3DOptions opt;
    opt.quadrature = quad_;
    opt.parallelism = par_;
    progress("evaluating " + std::to_string(grid.n) + "^3 grid");
    const vl::Map3D m = vl::map3d(config_, s0, spec_.scan.offset, grid, opt);
    Result res;
    auto& x = res.table.add("x", "um");
    auto& y = res.table.add("y", "um");
    auto& z = res.table.add("z", "um");
    auto& v = res.table.add("sigma_rr", "1");
    for (int i = 0; i < grid.n; ++i) {
      for (int j = 0; j < grid.n; ++j) {
        for (int k = 0; k < grid.n; ++k) {
          x.values.push_back(m.x(i));
          y.values.push_back(m.y(j));
          z.values.push_back(m.z(k));
          v.values.push_back(m.at(i, j, k));
        }
      }
    }
    res.summary = {{"offset", vl::to_string(m.offset)},
                   {"s0_mhz", s0.mhz()},
                   {"iso_level", m.iso_level},
                   {"peak", m.peak},
                   {"iso_points", m.iso_points.size()},
                   {"closed", m.closed},
                   {"extent_x_um", m.extent_x},
                   {"extent_y_um", m.extent_y},
                   {"extent_z_um", m.extent_z}};
    std::ostringstream iso;
    iso << "# iso-level " << io::format_number(m.iso_level) << " crossings\n# x [um],y [um],z [um]\n";
    for (const auto& p : m.iso_points) {
      iso << io::format_number(p.x) << ',' << io::format_number(p.y) << ',' << io::format_number(p.z) << '\n';
    }
    res.sidecars.push_back({".iso.csv", iso.str()});
    res.sidecars.push_back({".summary.json", res.summary.dump(1) + "\n"});
    res.line = "peak=" + fmt("%.6g", m.peak) + " extent_x=" + fmt("%.6g", m.extent_x * 1e3) +
               " nm extent_z=" + fmt("%.6g", m.extent_z * 1e3) + " nm";
    return res;
  }

  Result shift() {
    resolve_delta();
    const double lam = config_.beam.wavelength_c;
    const bool radial = spec_.scan.axis == "radial";
    if (!radial && spec_.scan.axis != "longitudinal") {
      throw vl::ConfigError("scan.axis", "expected radial or longitudinal");
    }
    const int n = spec_.scan.range_samples;
    if (n < 2) throw vl::ConfigError("scan.range_samples", "need at least two samples");
    const double span = spec_.scan.range_um > 0.0 ? spec_.scan.range_um : (radial ? 0.1 * lam : lam);
    const double start = radial ? 0.0 : vl::localized_z(config_) - 0.5 * span;
    std::vector<double> coords;
    for (int i = 0; i < n; ++i) coords.push_back(start + span * i / (n - 1));
    progress("evaluating " + std::to_string(n) + " shift samples");
    const vl::ShiftGrid g = vl::shift_profile(radial ? vl::ShiftAxis::Radial : vl::ShiftAxis::Longitudinal, coords,
                                              config_, quad_, mf_);
    Result res;
    auto& r = res.table.add("r_j", "um");
    auto& rl = res.table.add("r_j", "lambda_c");
    auto& z = res.table.add("z_j", "um");
    auto& zl = res.table.add("z_j", "lambda_c");
    auto& s = res.table.add("shift", "MHz");
    for (const auto& p : g.points) {
      r.values.push_back(p.r_j);
      rl.values.push_back(p.r_j / lam);
      z.values.push_back(p.z_j);
      zl.values.push_back(p.z_j / lam);
      s.values.push_back(p.s.mhz());
    }
    res.summary = {{"axis", spec_.scan.axis}, {"fingerprint", g.config_fingerprint}};
    if (g.near_core_flatness) res.summary["near_core_flatness"] = *g.near_core_flatness;
    res.line = "s/2pi(first)=" + fmt("%.6g", s.values.front()) + " MHz";
    if (g.near_core_flatness) res.line += " flatness=" + fmt("%.3g", *g.near_core_flatness);
    return res;
  }

  Result calibrate() {
    progress("calibrating detuning on the quadrature lattice");
    const bool sw = config_.detuning.mode == vl::DetuningMode::StandingWave;
    const vl::Calibration cal = sw ? vl::calibrate_delta_full(config_, quad_, mf_)
                                   : vl::calibrate_constant_detuning(config_, quad_, mf_);
    const vl::AngularFrequency tail =
        vl::truncation_tail_estimate(vl::Position{0.0, 0.0, vl::localized_z(config_)}, config_, quad_);
    Result res;
    res.table.add("delta", "MHz").values = {cal.delta.mhz()};
    res.table.add("s0", "MHz").values = {cal.shift.mhz()};
    res.table.add("iterations", "1").values = {static_cast<double>(cal.iterations)};
    res.summary = {{"delta_mhz", cal.delta.mhz()},
                   {"s0_mhz", cal.shift.mhz()},
                   {"tail_estimate_mhz", tail.mhz()}};
    res.line = std::string(sw ? "delta/2pi=" : "delta_c/2pi=") + fmt("%.6g", cal.delta.mhz()) +
               " MHz s0/2pi=" + fmt("%.6g", cal.shift.mhz()) + " MHz";
    return res;
  }

  Result blockade() {
    const vl::Position atom{0.0, 0.0, vl::localized_z(config_)};
    const vl::BlockadeBoundary b = vl::blockade_boundary(atom, config_, spec_.scan.blockade_angles);
    const double lam = config_.beam.wavelength_c;
    Result res;
    auto& th = res.table.add("theta", "rad");
    auto& d = res.table.add("distance", "um");
    auto& r = res.table.add("r", "um");
    auto& rl = res.table.add("r", "lambda_c");
    auto& z = res.table.add("z", "um");
    auto& zl = res.table.add("z", "lambda_c");
    for (const auto& p : b.points) {
      th.values.push_back(p.theta);
      d.values.push_back(p.distance);
      r.values.push_back(p.r);
      rl.values.push_back(p.r / lam);
      z.values.push_back(p.z);
      zl.values.push_back(p.z / lam);
    }
    res.summary = {{"min_distance_um", b.min_distance()}, {"max_distance_um", b.max_distance()}};
    res.line = "blockade distance " + fmt("%.6g", b.min_distance()) + ".." + fmt("%.6g", b.max_distance()) + " um";
    return res;
  }

  Result steady_time() {
    progress("integrating the Bloch equations");
    const double ts = vl::spot_edge_steady_time(config_, spec_.scan.tolerance, spec_.scan.eta);
    const double r = vl::radius_at_eta(config_, spec_.scan.eta);
    Result res;
    res.table.add("eta", "1").values = {spec_.scan.eta};
    res.table.add("r", "um").values = {r};
    res.table.add("tolerance", "1").values = {spec_.scan.tolerance};
    res.table.add("steady_time", "us").values = {ts};
    res.summary = {{"steady_time_us", ts}, {"eta", spec_.scan.eta}, {"tolerance", spec_.scan.tolerance}};
    res.line = "T_s=" + fmt("%.6g", ts) + " us";
    return res;
  }

  Result noise() {
    const vl::NoiseSpec ns = spec_.noise_spec();
    const vl::NoisyScan n = vl::noisy_transverse_scan(config_, ns, spec_.scan.r_max_um, spec_.scan.samples, par_);
    Result res = profile_table(n.mean);
    res.table.add("spread", "1").values = n.spread;
    res.summary["noise"] = {{"kind", vl::to_string(ns.kind)},
                            {"std", spec_.noise_std_input},
                            {"std_unit", ns.kind == vl::NoiseKind::Intensity ? "relative" : "MHz"},
                            {"trajectories", ns.trajectories},
                            {"seed", ns.seed}};
    res.summary["clamped"] = n.clamped;
    res.line += " clamped=" + std::to_string(n.clamped);
    return res;
  }

 private:
  Result profile_table(const vl::ScanProfile& p) {
    Result res;
    res.table.add(p.axis, "um").values = p.coords;
    auto& scaled = res.table.add(p.axis, "lambda_c");
    for (double x : p.coords) scaled.values.push_back(x / p.lambda_c);
    res.table.add("sigma_rr", "1").values = p.sigma;
    res.summary = {{"mode", vl::to_string(p.mode)}, {"peak", p.peak()}};
    if (p.fwhm) {
      res.summary["fwhm_um"] = p.fwhm->width;
      res.summary["fwhm_lambda_c"] = p.fwhm->width / p.lambda_c;
      res.line = "fwhm=" + fmt("%.6g", p.fwhm->width * 1e3) + " nm peak=" + fmt("%.6g", p.peak());
    } else {
      res.summary["fwhm_um"] = nullptr;
      res.line = "fwhm=none peak=" + fmt("%.6g", p.peak());
    }
    return res;
  }

  io::RunSpec spec_;
  vl::SystemConfig config_;
  vl::QuadratureSpec quad_;
  vl::MeanFieldOptions mf_;
  vl::Parallelism par_;
};

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << content;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rydberg atom localization with an optical-vortex control beam.\n"
               "Values are resolved with precedence: flags > config file > built-in defaults."};
  app.require_subcommand(1);
  app.fallthrough();
  Flags f;
  app.add_option("--config", f.config_path, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--out", f.out_path, "data file to write (sidecars use it as a prefix)");
  app.add_option("--format", f.format, "output format")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--seed", f.seed, "noise seed");
  app.add_option("--threads", f.threads, "worker cap; 0 uses all cores (does not change results)");
  app.add_option("--kappa", f.kappa, "peak control / probe amplitude ratio");
  app.add_option("--grid-spacing", f.grid_spacing, "quadrature spacing in lambda_c multiples");
  app.add_option("--grid-extent", f.extent, "quadrature extent in lambda_c multiples");
  app.add_option("--mask", f.mask, "blockade mask radius: local or core");
  app.add_option("--delta", f.delta, "detuning shift delta/2pi in MHz, or auto");
  app.add_option("--winding", f.winding_l, "vortex winding number l");
  app.add_option("--waist", f.waist, "beam waist W0 in um");
  app.add_option("--mode", f.mode, "antiblockade mode: none, perfect, partial");
  app.add_option("--r-max", f.r_max, "transverse half-width in um");
  app.add_option("--samples", f.samples, "samples per scan (odd for transverse scans)");
  app.add_option("--z-min", f.z_min, "longitudinal window start in um");
  app.add_option("--z-max", f.z_max, "longitudinal window end in um");
  app.add_option("--l-values", f.l_values, "winding numbers for scan-l")->delimiter(',');
  app.add_option("--offset", f.offset, "map3d detuning: calibrated or detuned");
  app.add_option("--map-points", f.map_points, "map3d points per axis (odd)");
  app.add_option("--map-half", f.map_half, "map3d half-width in um");
  app.add_option("--eta", f.eta, "steady-time evaluation point, eta = I_c / I_p");
  app.add_option("--tolerance", f.tolerance, "steady-time relative band");
  app.add_option("--axis", f.axis, "shift profile axis: radial or longitudinal");
  app.add_option("--range", f.range, "shift profile span in um");
  app.add_option("--range-samples", f.range_samples, "shift profile samples");
  app.add_option("--kind", f.kind, "noise kind: intensity or frequency");
  app.add_option("--std", f.std_dev, "noise std: relative to Omega_c0 (intensity) or MHz (frequency)");
  app.add_option("--trajectories", f.trajectories, "noise trajectories");
  app.add_option("--r", f.r, "steady: radius in um");
  app.add_option("--z", f.z, "steady: z in um (default 3 lambda_c / 4)");
  app.add_option("--phi", f.phi, "steady: azimuth in rad");

  const char* names[][2] = {{"steady", "steady-state sigma_rr at one point"},
                            {"scan-r", "transverse profile and FWHM"},
                            {"scan-z", "longitudinal profile and FWHM"},
                            {"scan-l", "FWHM against the winding number"},
                            {"map3d", "3D map and half-maximum crossings"},
                            {"shift", "mean-field shift profile"},
                            {"calibrate-delta", "self-consistent detuning calibration"},
                            {"blockade", "anisotropic blockade boundary"},
                            {"steady-time", "time to reach the steady state"},
                            {"noise", "noisy transverse profile"}};
  for (const auto& n : names) app.add_subcommand(n[0], n[1]);

  CLI11_PARSE(app, argc, argv);
  const std::string sub = app.get_subcommands().front()->get_name();

  const auto t0 = std::chrono::steady_clock::now();
  try {
    io::RunSpec spec;
    if (!f.config_path.empty()) io::apply_config_file(f.config_path, spec);
    apply_flags(f, spec);
    Runner runner(spec, f.threads);

    Result res;
    if (sub == "steady") res = runner.steady();
    else if (sub == "scan-r") res = runner.scan_r();
    else if (sub == "scan-z") res = runner.scan_z();
    else if (sub == "scan-l") res = runner.scan_l();
    else if (sub == "map3d") res = runner.map3d();
    else if (sub == "shift") res = runner.shift();
    else if (sub == "calibrate-delta") res = runner.calibrate();
    else if (sub == "blockade") res = runner.blockade();
    else if (sub == "steady-time") res = runner.steady_time();
    else res = runner.noise();

    io::Json manifest;
    manifest["tool"] = "vortex-localize";
    manifest["version"] = io::kToolVersion;
    manifest["subcommand"] = sub;
    manifest["config"] = io::manifest_config(spec, runner.config());
    manifest["seed"] = spec.noise.seed;
    manifest["summary"] = res.summary;

    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!f.out_path.empty()) {
      std::ostringstream data;
      if (f.format == "json") io::write_json(data, manifest, res.table);
      else io::write_csv(data, manifest, res.table);
      write_file(f.out_path, data.str());
      for (const auto& [suffix, content] : res.sidecars) write_file(f.out_path + suffix, content);
      // run-specific facts live apart from the data so reruns compare byte-for-byte
      io::Json run{{"data", f.out_path}, {"wall_clock_s", seconds}, {"threads", f.threads}};
      write_file(f.out_path + ".run.json", run.dump(1) + "\n");
    }
    std::cout << sub << ": " << res.line << std::endl;
    std::cerr << "[vortex-localize] done in " << fmt("%.2f", seconds) << " s" << std::endl;
  } catch (const vl::ConfigError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << sub << ": " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
