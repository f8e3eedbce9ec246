#pragma once

#include <cmath>
#include <complex>
#include <cstdlib>

#include "vortexloc/config.hpp"
#include "vortexloc/errors.hpp"
#include "vortexloc/units.hpp"

namespace vortexloc {

/// Local field values seen by an atom.
struct FieldSample {
  std::complex<double> omega_c;  // rad/us
  double omega_p = 0.0;          // rad/us
  AngularFrequency delta_c;
};

/// Real envelope Omega_c0 (r/W0)^|l| exp(-r^2/W0^2) of the vortex beam.
inline double lg_envelope(double r, const BeamConfig& beam) {
  const double u = r / beam.waist_w0;
  return beam.omega_c0.value() * std::pow(u, std::abs(beam.winding_l)) * std::exp(-u * u);
}

/// Complex Rabi amplitude of the doughnut Laguerre-Gaussian control beam
/// (collimated, no Gouy phase, W0 constant in z).
inline std::complex<double> lg_amplitude(const Position& pos, const BeamConfig& beam) {
  return std::polar(lg_envelope(pos.r, beam), beam.winding_l * pos.phi);
}

/// Control intensity I_c = |Omega_c|^2 at radius r.
inline double control_intensity(double r, const BeamConfig& beam) {
  const double a = lg_envelope(r, beam);
  return a * a;
}

/// Largest envelope value, reached at r = W0 sqrt(|l|/2).
inline double lg_envelope_max(const BeamConfig& beam) {
  const double l = std::abs(beam.winding_l);
  return beam.omega_c0.value() * std::pow(0.5 * l, 0.5 * l) * std::exp(-0.5 * l);
}

inline double lg_ring_radius(const BeamConfig& beam) {
  return beam.waist_w0 * std::sqrt(0.5 * std::abs(beam.winding_l));
}

/// Intensity ratio eta = I_c / I_p = kappa^2 (r/W0)^{2|l|} exp(-2 (r/W0)^2).
inline double intensity_ratio_eta(const Position& pos, const SystemConfig& c) {
  const double k = kappa(c);
  const double u = pos.r / c.beam.waist_w0;
  return k * k * std::pow(u, 2 * std::abs(c.beam.winding_l)) * std::exp(-2.0 * u * u);
}

/// Fourth-order expansion of eta about the core; only valid for |l| = 1.
inline double taylor_eta(double r, const SystemConfig& c) {
  if (std::abs(c.beam.winding_l) != 1) {
    throw ConfigError("beam.winding_l", "Taylor expansion of eta requires |l| = 1");
  }
  const double k = kappa(c);
  const double u2 = (r / c.beam.waist_w0) * (r / c.beam.waist_w0);
  return k * k * (u2 - 2.0 * u2 * u2);
}

/// Local control detuning Delta_c(z).
inline AngularFrequency detuning_profile(double z, const DetuningModulation& mod) {
  if (mod.mode == DetuningMode::Constant) return mod.delta_c_const;
  return mod.delta_c0 * std::sin(kTwoPi * z / mod.period) + mod.delta_shift;
}

inline FieldSample sample_fields(const Position& pos, const SystemConfig& c) {
  return {lg_amplitude(pos, c.beam), c.probe.omega_p0.value(), detuning_profile(pos.z, c.detuning)};
}

}  // namespace vortexloc
