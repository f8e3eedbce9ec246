#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstdio>
#include <string>

#include "vortexloc/errors.hpp"
#include "vortexloc/units.hpp"

namespace vortexloc {

/// Vortex control beam. Lengths in um.
struct BeamConfig {
  AngularFrequency omega_c0;  // peak control Rabi frequency
  double waist_w0 = 1.0;
  int winding_l = 1;
  double wavelength_c = 0.48;
  int radial_p = 0;  // only p = 0 modes are modelled
};

/// Traveling-wave probe of constant amplitude.
struct ProbeConfig {
  AngularFrequency omega_p0;
  AngularFrequency delta_p;
};

enum class DetuningMode { Constant, StandingWave };

/// Control detuning: either constant or Delta_c0 * sin(2 pi z / period) + delta.
struct DetuningModulation {
  DetuningMode mode = DetuningMode::StandingWave;
  AngularFrequency delta_c_const;
  AngularFrequency delta_c0;
  AngularFrequency delta_shift;
  double period = 0.48;  // um, equals the control wavelength
};

struct AtomMedium {
  AngularFrequency gamma_e;
  AngularFrequency gamma_r;
  double density_rho = 0.6;  // um^-3
  double c6 = 0.0;           // rad/us * um^6

  /// Coherence dephasing gamma = (Gamma_e + Gamma_r) / 2 (Gamma_g = 0).
  AngularFrequency dephasing() const { return 0.5 * (gamma_e + gamma_r); }
};

struct SystemConfig {
  BeamConfig beam;
  ProbeConfig probe;
  DetuningModulation detuning;
  AtomMedium medium;
};

/// Raw, unit-bearing configuration values: frequencies are nu = omega / 2pi
/// in MHz, lengths in um, density in um^-3, C6 / 2pi in MHz um^6.
struct RawConfig {
  double omega_c0_mhz = 80.0;
  double waist_um = 1.0;
  int winding_l = 1;
  double wavelength_c_um = 0.48;
  int radial_p = 0;

  double omega_p0_mhz = 0.8;
  double delta_p_mhz = 0.0;

  DetuningMode detuning_mode = DetuningMode::StandingWave;
  double delta_c_const_mhz = 0.0;
  double delta_c0_mhz = 30.0;
  double delta_shift_mhz = 30.0;

  double gamma_e_mhz = 6.05;
  double gamma_r_mhz = 0.0;
  double density_per_um3 = 0.6;  // 6e8 mm^-3
  double c6_mhz_um6 = 1.4e5;     // 140 GHz um^6
};

namespace detail {

inline void require(bool ok, const char* field, const char* what) {
  if (!ok) throw ConfigError(field, what);
}

inline bool finite(AngularFrequency a) { return std::isfinite(a.value()); }

}  // namespace detail

/// Checks every invariant of the configuration; throws ConfigError naming
/// the first violated field.
inline void validate(const SystemConfig& c) {
  using detail::finite;
  using detail::require;
  require(finite(c.beam.omega_c0), "beam.omega_c0", "must be finite");
  require(c.beam.omega_c0.value() >= 0.0, "beam.omega_c0", "must be non-negative");
  require(std::isfinite(c.beam.waist_w0) && c.beam.waist_w0 > 0.0, "beam.waist_w0",
          "waist must be positive");
  require(std::isfinite(c.beam.wavelength_c) && c.beam.wavelength_c > 0.0, "beam.wavelength_c",
          "wavelength must be positive");
  require(c.beam.radial_p == 0, "beam.radial_p", "higher radial modes are not supported");

  require(finite(c.probe.omega_p0) && c.probe.omega_p0.value() > 0.0, "probe.omega_p0",
          "probe Rabi frequency must be positive");
  require(finite(c.probe.delta_p), "probe.delta_p", "must be finite");

  require(finite(c.detuning.delta_c_const), "detuning.delta_c_const", "must be finite");
  require(finite(c.detuning.delta_c0) && c.detuning.delta_c0.value() >= 0.0, "detuning.delta_c0",
          "amplitude must be non-negative");
  require(finite(c.detuning.delta_shift), "detuning.delta_shift", "must be finite");
  require(std::isfinite(c.detuning.period) && c.detuning.period > 0.0, "detuning.period",
          "period must be positive");

  require(finite(c.medium.gamma_e) && c.medium.gamma_e.value() > 0.0, "medium.gamma_e",
          "decay rate must be positive");
  require(finite(c.medium.gamma_r) && c.medium.gamma_r.value() >= 0.0, "medium.gamma_r",
          "decay rate must be non-negative");
  require(std::isfinite(c.medium.density_rho) && c.medium.density_rho > 0.0,
          "medium.density_rho", "density must be positive");
  require(std::isfinite(c.medium.c6) && c.medium.c6 >= 0.0, "medium.c6",
          "C6 must be non-negative (repulsive interaction)");
}

/// Builds a validated configuration from raw MHz/um values.
inline SystemConfig make_config(const RawConfig& raw) {
  const double values[] = {raw.omega_c0_mhz,      raw.waist_um,        raw.wavelength_c_um,
                           raw.omega_p0_mhz,      raw.delta_p_mhz,     raw.delta_c_const_mhz,
                           raw.delta_c0_mhz,      raw.delta_shift_mhz, raw.gamma_e_mhz,
                           raw.gamma_r_mhz,       raw.density_per_um3, raw.c6_mhz_um6};
  for (double v : values) {
    if (!std::isfinite(v)) throw ConfigError("config", "all raw values must be finite");
  }

  SystemConfig c;
  c.beam.omega_c0 = AngularFrequency::from_mhz(raw.omega_c0_mhz);
  c.beam.waist_w0 = raw.waist_um;
  c.beam.winding_l = raw.winding_l;
  c.beam.wavelength_c = raw.wavelength_c_um;
  c.beam.radial_p = raw.radial_p;

  c.probe.omega_p0 = AngularFrequency::from_mhz(raw.omega_p0_mhz);
  c.probe.delta_p = AngularFrequency::from_mhz(raw.delta_p_mhz);

  c.detuning.mode = raw.detuning_mode;
  c.detuning.delta_c_const = AngularFrequency::from_mhz(raw.delta_c_const_mhz);
  c.detuning.delta_c0 = AngularFrequency::from_mhz(raw.delta_c0_mhz);
  c.detuning.delta_shift = AngularFrequency::from_mhz(raw.delta_shift_mhz);
  c.detuning.period = raw.wavelength_c_um;

  c.medium.gamma_e = AngularFrequency::from_mhz(raw.gamma_e_mhz);
  c.medium.gamma_r = AngularFrequency::from_mhz(raw.gamma_r_mhz);
  c.medium.density_rho = raw.density_per_um3;
  c.medium.c6 = kTwoPi * raw.c6_mhz_um6;

  validate(c);
  return c;
}

/// Reference parameter set for 87Rb |60s>: Omega_c0/2pi = 80 MHz, W0 = 1 um,
/// lambda_c = 480 nm, Gamma_e/2pi = 6.05 MHz, rho = 0.6 um^-3,
/// C6/2pi = 1.4e5 MHz um^6, Delta_c0/2pi = 30 MHz, with the probe set by kappa.
inline SystemConfig default_config(double kappa_ratio = 100.0) {
  RawConfig raw;
  raw.omega_p0_mhz = raw.omega_c0_mhz / kappa_ratio;
  return make_config(raw);
}

/// Control-to-probe peak amplitude ratio Omega_c0 / Omega_p0.
inline double kappa(const SystemConfig& c) { return c.beam.omega_c0 / c.probe.omega_p0; }

/// Returns a copy with the probe amplitude chosen so that kappa(c) == k.
inline SystemConfig with_kappa(SystemConfig c, double k) {
  if (!(std::isfinite(k) && k > 0.0)) throw ConfigError("probe.kappa", "kappa must be positive");
  c.probe.omega_p0 = c.beam.omega_c0 / k;
  validate(c);
  return c;
}

/// Position of the localized atom: on axis, at the detuning minimum z = 3 lambda_c / 4.
inline double localized_z(const SystemConfig& c) { return 0.75 * c.beam.wavelength_c; }

/// Stable 64-bit FNV-1a hash over every physical parameter, printed as hex.
/// Used to tie exported grids to the configuration that produced them.
inline std::string fingerprint(const SystemConfig& c) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  auto mix_d = [&](double v) { mix(&v, sizeof v); };
  auto mix_i = [&](std::int64_t v) { mix(&v, sizeof v); };
  mix_d(c.beam.omega_c0.value());
  mix_d(c.beam.waist_w0);
  mix_i(c.beam.winding_l);
  mix_d(c.beam.wavelength_c);
  mix_i(c.beam.radial_p);
  mix_d(c.probe.omega_p0.value());
  mix_d(c.probe.delta_p.value());
  mix_i(static_cast<std::int64_t>(c.detuning.mode));
  mix_d(c.detuning.delta_c_const.value());
  mix_d(c.detuning.delta_c0.value());
  mix_d(c.detuning.delta_shift.value());
  mix_d(c.detuning.period);
  mix_d(c.medium.gamma_e.value());
  mix_d(c.medium.gamma_r.value());
  mix_d(c.medium.density_rho);
  mix_d(c.medium.c6);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace vortexloc
