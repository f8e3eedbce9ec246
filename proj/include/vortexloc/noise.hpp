#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "vortexloc/bloch.hpp"
#include "vortexloc/config.hpp"
#include "vortexloc/errors.hpp"
#include "vortexloc/localization.hpp"
#include "vortexloc/parallel.hpp"

namespace vortexloc {

enum class NoiseKind { Intensity, Frequency };

inline const char* to_string(NoiseKind k) { return k == NoiseKind::Intensity ? "intensity" : "frequency"; }

/// Intensity noise: std_dev is relative to Omega_c0 (0.2 means 20 %).
/// Frequency noise: std_dev is an absolute detuning offset in rad/us.
struct NoiseSpec {
  NoiseKind kind = NoiseKind::Intensity;
  double std_dev = 0.0;
  int trajectories = 10;
  std::uint64_t seed = 0;
  double correlation_length = 0.0;  // um; only white noise (0) is implemented

  void validate() const {
    if (!(std::isfinite(std_dev) && std_dev >= 0.0)) {
      throw ConfigError("noise.std_dev", "standard deviation must be non-negative");
    }
    if (trajectories < 1) throw ConfigError("noise.trajectories", "need at least one trajectory");
    if (correlation_length != 0.0) {
      throw ConfigError("noise.correlation_length", "correlated noise is not implemented; use 0");
    }
  }
};

/// Generator for one trajectory. The stream depends only on (seed, index),
/// so adding trajectories never changes earlier ones.
inline std::mt19937_64 trajectory_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

struct AmplitudeField {
  std::vector<double> offsets;    // rad/us, added to Omega_c0 at each position
  std::vector<double> amplitude;  // max(0, Omega_c0 + offset)
  int clamped = 0;                // positions where the total went negative
};

/// Independent normal offsets Omega'_c0 at `n` positions.
inline AmplitudeField sample_intensity_field(const NoiseSpec& spec, AngularFrequency omega_c0, std::size_t n,
                                             std::mt19937_64& rng) {
  if (spec.kind != NoiseKind::Intensity) throw ConfigError("noise.kind", "expected intensity noise");
  spec.validate();
  AmplitudeField f;
  f.offsets.assign(n, 0.0);
  f.amplitude.assign(n, omega_c0.value());
  if (spec.std_dev == 0.0) return f;
  std::normal_distribution<double> normal(0.0, spec.std_dev * omega_c0.value());
  for (std::size_t i = 0; i < n; ++i) {
    f.offsets[i] = normal(rng);
    const double total = omega_c0.value() + f.offsets[i];
    if (total < 0.0) ++f.clamped;
    f.amplitude[i] = std::max(0.0, total);
  }
  return f;
}

/// Independent normal offsets (rad/us) on the detuning shift delta at `n` positions.
inline std::vector<double> sample_frequency_offsets(const NoiseSpec& spec, std::size_t n, std::mt19937_64& rng) {
  if (spec.kind != NoiseKind::Frequency) throw ConfigError("noise.kind", "expected frequency noise");
  spec.validate();
  std::vector<double> out(n, 0.0);
  if (spec.std_dev == 0.0) return out;
  std::normal_distribution<double> normal(0.0, spec.std_dev);
  for (double& v : out) v = normal(rng);
  return out;
}

struct NoisyScan {
  ScanProfile mean;            // averaged profile, FWHM of the average
  std::vector<double> spread;  // pointwise standard deviation across trajectories
  NoiseSpec spec;
  long long clamped = 0;
};

/// Transverse scan through the localized point with the shift exactly
/// compensated, repeated per trajectory with a fresh perturbation at every
/// sample. Frequency offsets enter as a residual two-photon detuning.
inline NoisyScan noisy_transverse_scan(const SystemConfig& c, const NoiseSpec& spec, double r_max = 0.0,
                                       int n_samples = 401, Parallelism par = {}) {
  spec.validate();
  const double half = r_max > 0.0 ? r_max : lg_ring_radius(c.beam);
  const std::vector<double> xs = symmetric_samples(half, n_samples);
  const double z = localized_z(c);
  SystemConfig base = c;
  base.detuning.mode = DetuningMode::Constant;
  base.detuning.delta_c_const = -c.probe.delta_p;

  auto sigma = [&](double x, double amplitude, double offset) {
    SystemConfig work = base;
    work.beam.omega_c0 = AngularFrequency(amplitude);
    work.detuning.delta_c_const = base.detuning.delta_c_const + AngularFrequency(offset);
    return steady_sigma_rr(make_drive(work, Position::cartesian(x, 0.0, z)));
  };

  const std::size_t n = xs.size();
  std::vector<double> clean(n);
  for (std::size_t i = 0; i < n; ++i) clean[i] = sigma(xs[i], c.beam.omega_c0.value(), 0.0);

  struct Trajectory {
    std::vector<double> values;
    int clamped = 0;
  };
  const auto runs = parallel_map<Trajectory>(static_cast<std::size_t>(spec.trajectories), par, [&](std::size_t t) {
    std::mt19937_64 rng = trajectory_rng(spec.seed, t);
    Trajectory out;
    out.values.resize(n);
    if (spec.kind == NoiseKind::Intensity) {
      const AmplitudeField f = sample_intensity_field(spec, c.beam.omega_c0, n, rng);
      for (std::size_t i = 0; i < n; ++i) out.values[i] = sigma(xs[i], f.amplitude[i], 0.0);
      out.clamped = f.clamped;
    } else {
      const std::vector<double> off = sample_frequency_offsets(spec, n, rng);
      for (std::size_t i = 0; i < n; ++i) out.values[i] = sigma(xs[i], c.beam.omega_c0.value(), off[i]);
    }
    return out;
  });

  NoisyScan res;
  res.spec = spec;
  res.mean.axis = "x";
  res.mean.mode = Antiblockade::None;
  res.mean.lambda_c = c.beam.wavelength_c;
  res.mean.coords = xs;
  res.mean.sigma.resize(n);
  res.spread.resize(n);
  const double count = static_cast<double>(spec.trajectories);
  std::vector<double> dev(runs.size());
  for (std::size_t i = 0; i < n; ++i) {
    // deviations from the clean value keep the zero-noise average exact
    for (std::size_t t = 0; t < runs.size(); ++t) dev[t] = runs[t].values[i] - clean[i];
    const double mean_dev = pairwise_sum(dev) / count;
    res.mean.sigma[i] = clean[i] + mean_dev;
    for (std::size_t t = 0; t < runs.size(); ++t) dev[t] = (dev[t] - mean_dev) * (dev[t] - mean_dev);
    res.spread[i] = std::sqrt(pairwise_sum(dev) / count);
  }
  for (const auto& r : runs) res.clamped += r.clamped;
  if (spec.std_dev == 0.0) {
    // noiseless: same continuous refinement as the deterministic scan
    auto f = [&](double x) { return sigma(x, c.beam.omega_c0.value(), 0.0); };
    res.mean.fwhm = extract_fwhm(f, res.mean.coords, res.mean.sigma, 1e-6 * c.beam.wavelength_c);
  } else if (res.mean.peak() >= 0.5) {
    res.mean.fwhm = extract_fwhm(res.mean.coords, res.mean.sigma, 0.5, false);
  }  // otherwise the averaged profile never reaches half maximum: no FWHM
  return res;
}

}  // namespace vortexloc
