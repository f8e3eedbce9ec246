#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vortexloc/bloch.hpp"
#include "vortexloc/config.hpp"
#include "vortexloc/errors.hpp"
#include "vortexloc/fields.hpp"
#include "vortexloc/parallel.hpp"
#include "vortexloc/units.hpp"

namespace vortexloc {

/// Midpoint lattice over r in [0, extent_r] and z in
/// [z_atom - extent_z/2, z_atom + extent_z/2]. Lengths in um.
struct QuadratureSpec {
  double extent_r = 48.0;
  double extent_z = 48.0;
  double spacing_r = 0.0048;
  double spacing_z = 0.0048;

  /// Square lattice with extents and spacing in units of lambda_c
  /// (100 and 0.01 reproduce the reference calibration grid).
  static QuadratureSpec in_wavelengths(double lambda_c, double spacing = 0.01, double extent = 100.0) {
    return {extent * lambda_c, extent * lambda_c, spacing * lambda_c, spacing * lambda_c};
  }

  QuadratureSpec halved() const { return {extent_r, extent_z, 0.5 * spacing_r, 0.5 * spacing_z}; }

  std::size_t rows() const { return static_cast<std::size_t>(std::llround(extent_r / spacing_r)); }
  std::size_t cols() const { return static_cast<std::size_t>(std::llround(extent_z / spacing_z)); }

  void validate() const {
    if (!(spacing_r > 0.0 && spacing_z > 0.0)) {
      throw ConfigError("quadrature.spacing", "spacings must be positive");
    }
    if (!(extent_r > 0.0 && extent_z > 0.0)) {
      throw ConfigError("quadrature.extent", "extents must be positive");
    }
    if (spacing_r > extent_r || spacing_z > extent_z) {
      throw ConfigError("quadrature.spacing", "spacings must not exceed the extents");
    }
  }
};

/// Which blockade radius defines the excluded region around the atom.
/// Local: R_b evaluated from the linewidth at each neighbour position, which
/// makes the region anisotropic. Core: a sphere with the radius at the atom.
enum class MaskRadius { Local, Core };

struct MeanFieldOptions {
  MaskRadius mask = MaskRadius::Local;
  Parallelism parallelism;
  /// Re-run at half spacing and fail if the results differ by more than 5 %.
  bool verify_convergence = false;
};

// ---------------------------------------------------------------------------
// Superatom bookkeeping

/// R_b = (C6 / w)^(1/6), in um.
inline double blockade_radius(AngularFrequency w, double c6) {
  if (!(w.value() > 0.0)) {
    throw NumericalError("blockade_radius", "linewidth must be positive (radius unbounded)");
  }
  return std::pow(c6 / w.value(), 1.0 / 6.0);
}

/// Atoms per blockade sphere, (4 pi / 3) R_b^3 rho.
inline double superatom_count(double rb, double rho) {
  return 4.0 * kPi / 3.0 * rb * rb * rb * rho;
}

/// Mean excitation per atom of a superatom, f0 / (1 + (N - 1) f0).
inline double excitation_fraction(double f0, double n_sa) { return f0 / (1.0 + (n_sa - 1.0) * f0); }

/// 0 strictly inside the blockade sphere of radius `rb` around `atom`, 1 on
/// or outside it. (r, z) is the neighbour position.
inline int chi_mask(double r, double z, const Position& atom, double rb) {
  const double dr = r - atom.r;
  const double dz = z - atom.z;
  return dr * dr + dz * dz < rb * rb ? 0 : 1;
}

/// Excitation linewidth at radius r (independent of the detuning).
inline AngularFrequency local_linewidth(double r, const SystemConfig& c) {
  return linewidth_w(make_drive(c, Position{r, 0.0, 0.0}));
}

inline double local_blockade_radius(double r, const SystemConfig& c) {
  return blockade_radius(local_linewidth(r, c), c.medium.c6);
}

/// Per-atom Rydberg excitation f_R of a neighbouring superatom at (r, z):
/// f0 is the unshifted steady population there and N_sa uses the local R_b.
inline double neighbour_excitation(double r, double z, const SystemConfig& c) {
  const LocalDrive d = make_drive(c, Position{r, 0.0, z});
  const double f0 = steady_sigma_rr(d);
  const double n_sa = superatom_count(blockade_radius(linewidth_w(d), c.medium.c6), c.medium.density_rho);
  return excitation_fraction(f0, n_sa);
}

namespace detail {

struct Lattice {
  std::vector<double> r;
  std::vector<double> z;
  double hr = 0.0;
  double hz = 0.0;
};

inline Lattice make_lattice(const QuadratureSpec& q, double z_center) {
  q.validate();
  Lattice lat;
  lat.hr = q.spacing_r;
  lat.hz = q.spacing_z;
  const std::size_t nr = q.rows();
  const std::size_t nz = q.cols();
  lat.r.resize(nr);
  lat.z.resize(nz);
  for (std::size_t i = 0; i < nr; ++i) lat.r[i] = (static_cast<double>(i) + 0.5) * lat.hr;
  const double z0 = z_center - 0.5 * q.extent_z;
  for (std::size_t k = 0; k < nz; ++k) lat.z[k] = z0 + (static_cast<double>(k) + 0.5) * lat.hz;
  return lat;
}

/// Per-row constants of the integrand. All neighbour-excitation formulas are
/// written as  r * num / ((a + b T + c T^2) * d^6)  with T the per-column
/// two-photon detuning.
struct RowTerms {
  double r = 0.0;
  double num = 0.0;
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double mask_r2 = 0.0;
};

/// Fixed-order lattice reduction: each row is summed sequentially, rows are
/// combined by pairwise summation. Independent of the worker count.
inline double lattice_sum(const Lattice& lat, const Position& atom, std::span<const RowTerms> rows,
                          std::span<const double> col_t, Parallelism par) {
  std::vector<double> dz2(lat.z.size());
  for (std::size_t k = 0; k < lat.z.size(); ++k) {
    const double dz = lat.z[k] - atom.z;
    dz2[k] = dz * dz;
  }
  const std::vector<double> row_sums = parallel_map<double>(rows.size(), par, [&](std::size_t i) {
    const RowTerms& t = rows[i];
    const double dr = t.r - atom.r;
    const double dr2 = dr * dr;
    double acc = 0.0;
    for (std::size_t k = 0; k < dz2.size(); ++k) {
      const double d2 = dr2 + dz2[k];
      if (d2 < t.mask_r2) continue;
      const double tk = col_t[k];
      acc += 1.0 / ((t.a + tk * (t.b + t.c * tk)) * (d2 * d2 * d2));
    }
    return t.r * t.num * acc;
  });
  return pairwise_sum(row_sums);
}

inline double core_blockade_radius(const Position& atom, const SystemConfig& c) {
  return local_blockade_radius(atom.r, c);
}

inline void guard_resolution(const Lattice& lat, std::span<const RowTerms> rows, double core_rb) {
  double min_rb = core_rb;
  for (const RowTerms& t : rows) min_rb = std::min(min_rb, std::sqrt(t.mask_r2));
  if (min_rb < 2.0 * std::max(lat.hr, lat.hz)) {
    throw NumericalError("meanfield", "blockade radius is below two lattice spacings");
  }
}

enum class Integrand { ExcitationFraction, ClosedFormB };

/// Shared driver for both integrand forms.
inline AngularFrequency shift_integral(const Position& atom, const SystemConfig& c,
                                       const QuadratureSpec& q, const MeanFieldOptions& opt,
                                       Integrand form) {
  if (c.medium.c6 == 0.0) return AngularFrequency{};
  const Lattice lat = make_lattice(q, atom.z);
  const double ip = c.probe.omega_p0.value() * c.probe.omega_p0.value();
  const double g = c.medium.dephasing().value();
  const double dp = c.probe.delta_p.value();
  const double rho = c.medium.density_rho;
  const double core_rb = core_blockade_radius(atom, c);

  std::vector<RowTerms> rows(lat.r.size());
  for (std::size_t i = 0; i < lat.r.size(); ++i) {
    const double r = lat.r[i];
    const double ic = control_intensity(r, c.beam);
    const double rb = local_blockade_radius(r, c);
    const double n_sa = superatom_count(rb, rho);
    RowTerms& t = rows[i];
    t.r = r;
    t.mask_r2 = opt.mask == MaskRadius::Local ? rb * rb : core_rb * core_rb;
    if (form == Integrand::ExcitationFraction) {
      // f_R = num / (den + (N - 1) num), den the steady-state denominator at s = 0
      t.num = ip * (ip + ic);
      t.a = (ip + ic) * (ip + ic) + (n_sa - 1.0) * t.num;
      t.b = -2.0 * dp * ic;
      t.c = g * g + dp * dp + 2.0 * ip;
    } else {
      // B = I_c + N I_p + (gamma^2 + 2 I_p) Delta_c(z)^2 / (I_p + I_c), f_R = I_p / B
      t.num = ip;
      t.a = ic + n_sa * ip;
      t.b = 0.0;
      t.c = (g * g + 2.0 * ip) / (ip + ic);
    }
  }
  guard_resolution(lat, rows, core_rb);

  std::vector<double> col_t(lat.z.size());
  for (std::size_t k = 0; k < lat.z.size(); ++k) {
    const double dc = detuning_profile(lat.z[k], c.detuning).value();
    col_t[k] = form == Integrand::ExcitationFraction ? dp + dc : dc;
  }
  const double sum = lattice_sum(lat, atom, rows, col_t, opt.parallelism);
  return AngularFrequency(kTwoPi * c.medium.c6 * rho * sum * lat.hr * lat.hz);
}

inline AngularFrequency checked_integral(const Position& atom, const SystemConfig& c,
                                         const QuadratureSpec& q, const MeanFieldOptions& opt,
                                         Integrand form, const char* op) {
  const AngularFrequency s = shift_integral(atom, c, q, opt, form);
  if (opt.verify_convergence) {
    const AngularFrequency fine = shift_integral(atom, c, q.halved(), opt, form);
    if (std::abs((s - fine).value()) > 0.05 * std::abs(fine.value())) {
      throw NumericalError(op, "quadrature not converged: spacing too coarse (>5% change on halving)");
    }
  }
  return s;
}

}  // namespace detail

/// Mean-field Rydberg shift felt by an atom at `atom`: the C6 / d^6 kernel
/// weighted by the neighbour excitation density rho * f_R, integrated over
/// the (r, z) half-plane outside the blockade region with the azimuthal
/// factor 2 pi r.
inline AngularFrequency shift_at(const Position& atom, const SystemConfig& c, const QuadratureSpec& q,
                                 const MeanFieldOptions& opt = {}) {
  return detail::checked_integral(atom, c, q, opt, detail::Integrand::ExcitationFraction, "shift_at");
}

/// Shift at the localized point (0, 3 lambda_c / 4) written with the closed
/// denominator B = I_c + N_sa I_p + (gamma^2 + 2 I_p) Delta_c(z)^2 / (I_p + I_c).
/// Requires the standing-wave detuning and Delta_p = 0.
inline AngularFrequency s0_integral(const SystemConfig& c, const QuadratureSpec& q,
                                    const MeanFieldOptions& opt = {}) {
  if (c.detuning.mode != DetuningMode::StandingWave) {
    throw ConfigError("detuning.mode", "s0 integral requires the standing-wave detuning");
  }
  if (c.probe.delta_p.value() != 0.0) {
    throw ConfigError("probe.delta_p", "s0 integral assumes Delta_p = 0");
  }
  const Position atom{0.0, 0.0, localized_z(c)};
  return detail::checked_integral(atom, c, q, opt, detail::Integrand::ClosedFormB, "s0_integral");
}

struct Calibration {
  AngularFrequency delta;  // calibrated detuning value
  AngularFrequency shift;  // shift at the localized point
  int iterations = 0;
};

/// Solves delta = Delta_c0 + s0(delta) by fixed-point iteration: the shift
/// depends on delta through the neighbours' detuning.
inline Calibration calibrate_delta_full(const SystemConfig& c, const QuadratureSpec& q,
                                        const MeanFieldOptions& opt = {}, double rel_tol = 1e-9,
                                        int max_iterations = 60) {
  if (c.detuning.mode != DetuningMode::StandingWave) {
    throw ConfigError("detuning.mode", "delta calibration requires the standing-wave detuning");
  }
  SystemConfig work = c;
  Calibration cal{c.detuning.delta_c0, AngularFrequency{}, 0};
  for (int it = 1; it <= max_iterations; ++it) {
    work.detuning.delta_shift = cal.delta;
    const AngularFrequency s0 = s0_integral(work, q, opt);
    const AngularFrequency next = c.detuning.delta_c0 + s0;
    const double change = std::abs((next - cal.delta).value());
    cal = {next, s0, it};
    if (change <= rel_tol * std::max(std::abs(s0.value()), 1e-300)) return cal;
  }
  throw NumericalError("calibrate_delta", "fixed-point iteration did not converge");
}

/// Partial-antiblockade detuning delta = Delta_c0 + s0.
inline AngularFrequency calibrate_delta(const SystemConfig& c, const QuadratureSpec& q,
                                        const MeanFieldOptions& opt = {}) {
  return calibrate_delta_full(c, q, opt).delta;
}

/// Constant-detuning analogue: Delta_c = s(0, z_atom) solved self-consistently.
inline Calibration calibrate_constant_detuning(const SystemConfig& c, const QuadratureSpec& q,
                                               const MeanFieldOptions& opt = {}, double rel_tol = 1e-9,
                                               int max_iterations = 60) {
  SystemConfig work = c;
  work.detuning.mode = DetuningMode::Constant;
  const Position atom{0.0, 0.0, localized_z(c)};
  Calibration cal{AngularFrequency{}, AngularFrequency{}, 0};
  for (int it = 1; it <= max_iterations; ++it) {
    work.detuning.delta_c_const = cal.delta - c.probe.delta_p;
    const AngularFrequency s = shift_at(atom, work, q, opt);
    const double change = std::abs((s - cal.delta).value());
    cal = {s - c.probe.delta_p, s, it};
    if (change <= rel_tol * std::max(std::abs(s.value()), 1e-300)) return cal;
  }
  throw NumericalError("calibrate_constant_detuning", "fixed-point iteration did not converge");
}

/// Estimate of the shift contributed from beyond the lattice:
/// C6 rho f_avg (4 pi / 3) / D^3, with D the distance from the atom to the
/// nearest lattice edge and f_avg the largest one-period average of the
/// neighbour excitation over r. Valid when the lattice spans many periods.
inline AngularFrequency truncation_tail_estimate(const Position& atom, const SystemConfig& c,
                                                 const QuadratureSpec& q) {
  if (c.medium.c6 == 0.0) return AngularFrequency{};
  const double dist = std::min(q.extent_r - atom.r, 0.5 * q.extent_z);
  const double period = c.detuning.mode == DetuningMode::StandingWave ? c.detuning.period : 1.0;
  constexpr int kPhase = 512;
  double f_avg = 0.0;
  for (double r = 0.0; r <= q.extent_r; r += 0.01 * c.beam.waist_w0) {
    double acc = 0.0;
    for (int k = 0; k < kPhase; ++k) {
      acc += neighbour_excitation(r, (k + 0.5) * period / kPhase, c);
    }
    f_avg = std::max(f_avg, acc / kPhase);
    if (r > 6.0 * c.beam.waist_w0) break;  // I_c is negligible beyond, f_avg no longer changes
  }
  return AngularFrequency(c.medium.c6 * c.medium.density_rho * f_avg * 4.0 * kPi / 3.0 /
                          (dist * dist * dist));
}

// ---------------------------------------------------------------------------
// Shift profiles

enum class ShiftAxis { Radial, Longitudinal };

struct ShiftPoint {
  double r_j = 0.0;
  double z_j = 0.0;
  AngularFrequency s;
};

struct ShiftGrid {
  ShiftAxis axis = ShiftAxis::Radial;
  QuadratureSpec quadrature;
  std::string config_fingerprint;
  std::vector<ShiftPoint> points;
  /// max |s(r_j) - s(0)| / s(0) over sampled r_j <= 0.1 lambda_c (radial only).
  std::optional<double> near_core_flatness;
};

/// Samples the shift along r_j (at z_j = 3 lambda_c / 4) or along z_j (at r_j = 0).
inline ShiftGrid shift_profile(ShiftAxis axis, std::span<const double> coords, const SystemConfig& c,
                               const QuadratureSpec& q, const MeanFieldOptions& opt = {}) {
  ShiftGrid grid;
  grid.axis = axis;
  grid.quadrature = q;
  grid.config_fingerprint = fingerprint(c);
  for (double x : coords) {
    const Position atom = axis == ShiftAxis::Radial ? Position{x, 0.0, localized_z(c)}
                                                    : Position{0.0, 0.0, x};
    if (axis == ShiftAxis::Radial && (x < 0.0 || x >= q.extent_r)) {
      throw ConfigError("shift.range", "radial samples must lie inside the quadrature extent");
    }
    grid.points.push_back({atom.r, atom.z, shift_at(atom, c, q, opt)});
  }
  if (axis == ShiftAxis::Radial) {
    const double limit = 0.1 * c.beam.wavelength_c;
    auto origin = std::find_if(grid.points.begin(), grid.points.end(),
                               [](const ShiftPoint& p) { return p.r_j == 0.0; });
    if (origin != grid.points.end() && origin->s.value() != 0.0) {
      double worst = 0.0;
      for (const ShiftPoint& p : grid.points) {
        if (p.r_j <= limit) worst = std::max(worst, std::abs((p.s - origin->s) / origin->s));
      }
      grid.near_core_flatness = worst;
    }
  }
  return grid;
}

// ---------------------------------------------------------------------------
// Blockade boundary

struct BoundaryPoint {
  double theta = 0.0;     // angle from +z in the (r, z) half-plane
  double distance = 0.0;  // |Delta r| at the boundary
  double r = 0.0;
  double z = 0.0;
};

struct BlockadeBoundary {
  Position atom;
  std::vector<BoundaryPoint> points;

  double max_distance() const {
    double m = 0.0;
    for (const auto& p : points) m = std::max(m, p.distance);
    return m;
  }
  double min_distance() const {
    double m = points.empty() ? 0.0 : points.front().distance;
    for (const auto& p : points) m = std::min(m, p.distance);
    return m;
  }
};

/// Traces the edge of the blockade region around `atom`. Along each ray the
/// boundary is the first distance d with d >= R_b(r, z), R_b evaluated at the
/// candidate neighbour; the traced region is star-shaped by construction.
/// `rb_at(r, z)` returns the local blockade radius.
template <class RadiusFn>
BlockadeBoundary trace_blockade_boundary(const Position& atom, RadiusFn&& rb_at, int n_angles,
                                         double d_max) {
  if (n_angles < 2) throw ConfigError("blockade.resolution", "need at least two angles");
  BlockadeBoundary out{atom, {}};
  const double step = d_max / 4000.0;
  for (int k = 0; k < n_angles; ++k) {
    const double theta = kPi * k / (n_angles - 1);
    const double sr = std::sin(theta);
    const double cz = std::cos(theta);
    auto excess = [&](double d) { return d - rb_at(atom.r + d * sr, atom.z + d * cz); };
    double lo = 0.0;
    double hi = -1.0;
    for (double d = step; d <= d_max; d += step) {
      if (excess(d) >= 0.0) {
        hi = d;
        break;
      }
      lo = d;
    }
    if (hi < 0.0) throw NumericalError("blockade_boundary", "no boundary within search distance");
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      (excess(mid) >= 0.0 ? hi : lo) = mid;
    }
    const double d = 0.5 * (lo + hi);
    out.points.push_back({theta, d, atom.r + d * sr, atom.z + d * cz});
  }
  return out;
}

/// Anisotropic blockade boundary of the configured vortex beam.
inline BlockadeBoundary blockade_boundary(const Position& atom, const SystemConfig& c, int n_angles = 721) {
  auto rb_at = [&c](double r, double) { return local_blockade_radius(std::abs(r), c); };
  const double d_max = 4.0 * local_blockade_radius(atom.r, c) + 4.0 * c.beam.waist_w0;
  return trace_blockade_boundary(atom, rb_at, n_angles, d_max);
}

}  // namespace vortexloc
