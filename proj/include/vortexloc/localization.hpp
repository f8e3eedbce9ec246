#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vortexloc/bloch.hpp"
#include "vortexloc/config.hpp"
#include "vortexloc/errors.hpp"
#include "vortexloc/fields.hpp"
#include "vortexloc/meanfield.hpp"
#include "vortexloc/parallel.hpp"
#include "vortexloc/units.hpp"

namespace vortexloc {

// ---------------------------------------------------------------------------
// FWHM extraction

struct Fwhm {
  double width = 0.0;
  double left = 0.0;
  double right = 0.0;
  double peak_x = 0.0;
  double peak_value = 0.0;
};

namespace detail {

inline std::size_t argmax(std::span<const double> ys) {
  return static_cast<std::size_t>(std::max_element(ys.begin(), ys.end()) - ys.begin());
}

inline void check_samples(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 3) {
    throw NumericalError("extract_fwhm", "need at least three samples with matching coordinates");
  }
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (!(xs[i] > xs[i - 1])) throw NumericalError("extract_fwhm", "coordinates must increase strictly");
  }
}

/// Number of disjoint runs of samples at or above `level`.
inline int runs_above(std::span<const double> ys, double level) {
  int runs = 0;
  bool inside = false;
  for (double y : ys) {
    const bool above = y >= level;
    if (above && !inside) ++runs;
    inside = above;
  }
  return runs;
}

/// Indices (i_left, i_right) of the first samples below `level` on each side
/// of `peak`; throws when a side never drops below.
inline std::pair<std::size_t, std::size_t> bracket_crossings(std::span<const double> ys, std::size_t peak,
                                                             double level) {
  if (ys[peak] < level) throw NumericalError("extract_fwhm", "no crossing: maximum below the level");
  std::size_t lo = peak;
  while (lo > 0 && ys[lo] >= level) --lo;
  std::size_t hi = peak;
  while (hi + 1 < ys.size() && ys[hi] >= level) ++hi;
  if (ys[lo] >= level || ys[hi] >= level) {
    throw NumericalError("extract_fwhm", "no crossing: profile does not fall below the level on both sides");
  }
  return {lo, hi};
}

}  // namespace detail

/// Bisection for f(x) = level inside [a, b], where f(a) and f(b) straddle it.
template <class Fn>
double bisect_level(Fn&& f, double a, double b, double level, double tol) {
  double fa = f(a) - level;
  for (int it = 0; it < 200 && std::abs(b - a) > tol; ++it) {
    const double m = 0.5 * (a + b);
    const double fm = f(m) - level;
    if ((fm >= 0.0) == (fa >= 0.0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
  }
  return 0.5 * (a + b);
}

/// FWHM of sampled data, crossings located on the piecewise-linear
/// interpolant. With `unique_peak` a second run of samples at or above
/// `level` is an error; otherwise the run holding the maximum is used.
inline Fwhm extract_fwhm(std::span<const double> xs, std::span<const double> ys, double level = 0.5,
                         bool unique_peak = true) {
  detail::check_samples(xs, ys);
  if (unique_peak && detail::runs_above(ys, level) > 1) {
    throw NumericalError("extract_fwhm", "multiple peaks above the level; restrict the window");
  }
  const std::size_t peak = detail::argmax(ys);
  const auto [lo, hi] = detail::bracket_crossings(ys, peak, level);
  auto lerp = [&](std::size_t i, std::size_t j) {
    return xs[i] + (level - ys[i]) * (xs[j] - xs[i]) / (ys[j] - ys[i]);
  };
  Fwhm out;
  out.left = lerp(lo, lo + 1);
  out.right = lerp(hi - 1, hi);
  out.width = out.right - out.left;
  out.peak_x = xs[peak];
  out.peak_value = ys[peak];
  return out;
}

/// FWHM of a continuous profile: the samples only bracket the crossings,
/// which are then refined by bisection on `f` to `tol`.
template <class Fn>
Fwhm extract_fwhm(Fn&& f, std::span<const double> xs, std::span<const double> ys, double tol,
                  double level = 0.5) {
  detail::check_samples(xs, ys);
  if (detail::runs_above(ys, level) > 1) {
    throw NumericalError("extract_fwhm", "multiple peaks above the level; restrict the window");
  }
  const std::size_t peak = detail::argmax(ys);
  const auto [lo, hi] = detail::bracket_crossings(ys, peak, level);
  Fwhm out;
  out.left = bisect_level(f, xs[lo], xs[lo + 1], level, tol);
  out.right = bisect_level(f, xs[hi - 1], xs[hi], level, tol);
  out.width = out.right - out.left;
  out.peak_x = xs[peak];
  out.peak_value = ys[peak];
  return out;
}

// ---------------------------------------------------------------------------
// Profiles

/// How the Rydberg shift is compensated along a transverse scan.
/// None: s = 0 and exact two-photon resonance. Perfect: Delta_c = s(r_j) at
/// every point. Partial: Delta_c fixed at s(0), s(r_j) evaluated pointwise.
enum class Antiblockade { None, Perfect, Partial };

inline const char* to_string(Antiblockade m) {
  switch (m) {
    case Antiblockade::None: return "none";
    case Antiblockade::Perfect: return "perfect";
    case Antiblockade::Partial: return "partial";
  }
  return "?";
}

struct ScanProfile {
  std::string axis;  // "x" for transverse, "z" for longitudinal
  std::vector<double> coords;  // um
  std::vector<double> sigma;
  std::vector<double> shift_mhz;  // s / 2pi per sample; empty when s is not evaluated
  std::optional<Fwhm> fwhm;
  Antiblockade mode = Antiblockade::None;
  double lambda_c = 0.48;
  AngularFrequency delta_c;  // constant detuning used (partial mode) or frozen s (longitudinal)

  double peak() const { return sigma.empty() ? 0.0 : *std::max_element(sigma.begin(), sigma.end()); }
};

/// Quadrature spacing used by scans unless overridden: 0.02 lambda_c on the
/// standard 100 lambda_c domain.
inline QuadratureSpec scan_quadrature(const SystemConfig& c) {
  return QuadratureSpec::in_wavelengths(c.beam.wavelength_c, 0.02);
}

struct TransverseScanOptions {
  Antiblockade mode = Antiblockade::None;
  double r_max = 0.0;  // <= 0 selects the ring radius W0 sqrt(|l| / 2)
  int n_samples = 401;  // odd, samples x in [-r_max, r_max]
  std::optional<QuadratureSpec> quadrature;  // defaults to scan_quadrature(config)
  MeanFieldOptions meanfield;
  Parallelism parallelism;
};

inline std::vector<double> symmetric_samples(double half_width, int n) {
  if (n < 3 || n % 2 == 0) throw ConfigError("scan.n_samples", "sample count must be odd and >= 3");
  std::vector<double> xs(static_cast<std::size_t>(n));
  const int mid = n / 2;
  for (int i = 0; i < n; ++i) xs[static_cast<std::size_t>(i)] = half_width * (i - mid) / mid;
  return xs;
}

/// Transverse profile sigma_rr(x) through the localized plane z = 3 lambda_c / 4.
/// For Perfect and Partial the shift uses a constant control detuning equal to
/// the self-consistent s(0) (see calibrate_constant_detuning).
inline ScanProfile transverse_scan(const SystemConfig& c, const TransverseScanOptions& opt) {
  if (c.beam.winding_l == 0) throw ConfigError("beam.winding_l", "a vortex beam needs l != 0");
  const double r_max = opt.r_max > 0.0 ? opt.r_max : lg_ring_radius(c.beam);
  const double z = localized_z(c);

  ScanProfile prof;
  prof.axis = "x";
  prof.mode = opt.mode;
  prof.lambda_c = c.beam.wavelength_c;
  prof.coords = symmetric_samples(r_max, opt.n_samples);

  SystemConfig work = c;
  work.detuning.mode = DetuningMode::Constant;
  std::function<double(double)> sigma_at;
  if (opt.mode == Antiblockade::None) {
    work.detuning.delta_c_const = -c.probe.delta_p;
    sigma_at = [work, z](double x) { return steady_sigma_rr(make_drive(work, Position::cartesian(x, 0.0, z))); };
    prof.sigma = parallel_map<double>(prof.coords.size(), opt.parallelism,
                                      [&](std::size_t i) { return sigma_at(prof.coords[i]); });
  } else {
    const QuadratureSpec q = opt.quadrature.value_or(scan_quadrature(c));
    const Calibration cal = calibrate_constant_detuning(c, q, opt.meanfield);
    work.detuning.delta_c_const = cal.delta;
    prof.delta_c = cal.delta;

    // s depends on |x| only: evaluate each distinct radius once, in parallel
    std::vector<double> radii;
    for (double x : prof.coords) {
      if (x > 0.0) radii.push_back(x);
    }
    const std::vector<double> s = parallel_map<double>(radii.size(), opt.parallelism, [&](std::size_t i) {
      return shift_at(Position{radii[i], 0.0, z}, work, q, opt.meanfield).value();
    });
    auto cache = std::make_shared<std::map<double, double>>();
    (*cache)[0.0] = cal.shift.value();
    for (std::size_t i = 0; i < radii.size(); ++i) (*cache)[radii[i]] = s[i];

    const MeanFieldOptions mf = opt.meanfield;
    const Antiblockade mode = opt.mode;
    sigma_at = [work, z, q, mf, mode, cache](double x) {
      const double r = std::abs(x);
      auto it = cache->find(r);
      if (it == cache->end()) {
        it = cache->emplace(r, shift_at(Position{r, 0.0, z}, work, q, mf).value()).first;
      }
      const AngularFrequency sv(it->second);
      LocalDrive d = make_drive(work, Position::cartesian(x, 0.0, z), sv);
      if (mode == Antiblockade::Perfect) d.delta_c = sv - d.delta_p;
      return steady_sigma_rr(d);
    };
    for (double x : prof.coords) {
      prof.shift_mhz.push_back(cache->at(std::abs(x)) / kTwoPi);
      prof.sigma.push_back(sigma_at(x));
    }
  }

  const double tol = 1e-6 * c.beam.wavelength_c;
  prof.fwhm = extract_fwhm(sigma_at, prof.coords, prof.sigma, tol);
  return prof;
}

/// Transverse FWHM a_r = W0 sqrt(1 - sqrt(kappa^2 - 8) / kappa) from the
/// fourth-order expansion of eta (|l| = 1, perfect antiblockade).
inline double analytic_a_r(double kappa_ratio, double w0) {
  const double k_min = 2.0 * std::sqrt(2.0);
  if (!(kappa_ratio >= k_min * (1.0 - 1e-12))) {
    throw ConfigError("kappa", "analytic transverse width needs kappa >= 2 sqrt(2)");
  }
  const double inner = std::max(0.0, kappa_ratio * kappa_ratio - 8.0);
  return w0 * std::sqrt(1.0 - std::sqrt(inner) / kappa_ratio);
}

struct OamWidth {
  int winding_l = 0;
  double fwhm = 0.0;
};

/// Transverse FWHM (no shift, exact resonance) for each winding number.
inline std::vector<OamWidth> oam_broadening_scan(const SystemConfig& c, std::span<const int> l_values,
                                                 int n_samples = 401, Parallelism par = {}) {
  std::vector<OamWidth> out;
  for (int l : l_values) {
    if (l < 1) throw ConfigError("scan.l_values", "winding numbers must be >= 1");
    SystemConfig cl = c;
    cl.beam.winding_l = l;
    TransverseScanOptions opt;
    opt.n_samples = n_samples;
    opt.parallelism = par;
    out.push_back({l, transverse_scan(cl, opt).fwhm->width});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Longitudinal profile

/// sigma_rr(0, z) under the standing-wave detuning with the shift frozen at
/// `s_frozen`. The FWHM is taken in the period centred on the localized point
/// nearest the window centre.
inline ScanProfile longitudinal_scan(const SystemConfig& c, AngularFrequency s_frozen, double z_lo,
                                     double z_hi, int n_samples, Parallelism par = {}) {
  if (c.detuning.mode != DetuningMode::StandingWave) {
    throw ConfigError("detuning.mode", "longitudinal scan requires the standing-wave detuning");
  }
  if (!(z_hi > z_lo) || n_samples < 3) throw ConfigError("scan.z_range", "need z_hi > z_lo and >= 3 samples");
  ScanProfile prof;
  prof.axis = "z";
  prof.mode = Antiblockade::Partial;
  prof.lambda_c = c.beam.wavelength_c;
  prof.delta_c = s_frozen;
  prof.coords.resize(static_cast<std::size_t>(n_samples));
  for (int i = 0; i < n_samples; ++i) {
    prof.coords[static_cast<std::size_t>(i)] = z_lo + (z_hi - z_lo) * i / (n_samples - 1);
  }
  auto sigma_at = [&](double z) { return steady_sigma_rr(make_drive(c, Position{0.0, 0.0, z}, s_frozen)); };
  prof.sigma = parallel_map<double>(prof.coords.size(), par, [&](std::size_t i) { return sigma_at(prof.coords[i]); });

  // one period around the localized point closest to the window centre
  const double lam = c.detuning.period;
  const double centre = 0.5 * (z_lo + z_hi);
  const double z_peak = (std::round(centre / lam - 0.75) + 0.75) * lam;
  std::vector<double> wx;
  std::vector<double> wy;
  for (std::size_t i = 0; i < prof.coords.size(); ++i) {
    if (std::abs(prof.coords[i] - z_peak) <= 0.5 * lam) {
      wx.push_back(prof.coords[i]);
      wy.push_back(prof.sigma[i]);
    }
  }
  if (wx.size() >= 3) prof.fwhm = extract_fwhm(sigma_at, wx, wy, 1e-6 * lam);
  return prof;
}

/// Positions of the local maxima of a sampled profile (interior samples only).
inline std::vector<double> local_maxima(const ScanProfile& p) {
  std::vector<double> out;
  for (std::size_t i = 1; i + 1 < p.sigma.size(); ++i) {
    if (p.sigma[i] > p.sigma[i - 1] && p.sigma[i] >= p.sigma[i + 1]) out.push_back(p.coords[i]);
  }
  return out;
}

/// Longitudinal FWHM a_z = [1/2 - arcsin(1 - w / Delta_c0) / pi] lambda_c.
inline double analytic_a_z(AngularFrequency w, AngularFrequency delta_c0, double lambda_c) {
  if (!(w.value() > 0.0) || !(delta_c0.value() > 0.0) || w.value() > 2.0 * delta_c0.value()) {
    throw NumericalError("analytic_a_z", "requires 0 < w <= 2 Delta_c0");
  }
  const double arg = std::clamp(1.0 - w / delta_c0, -1.0, 1.0);
  return (0.5 - std::asin(arg) / kPi) * lambda_c;
}

/// Linewidth at the vortex core (I_c = 0).
inline AngularFrequency core_linewidth(const SystemConfig& c) { return local_linewidth(0.0, c); }

// ---------------------------------------------------------------------------
// Steady time at the edge of the localized spot

/// Inner radius where eta = `eta_target` (eta rises monotonically from the
/// core to the ring radius).
inline double radius_at_eta(const SystemConfig& c, double eta_target) {
  const double ring = lg_ring_radius(c.beam);
  if (!(eta_target > 0.0) || intensity_ratio_eta(Position{ring, 0.0, 0.0}, c) < eta_target) {
    throw NumericalError("radius_at_eta", "eta target not reached inside the ring");
  }
  return bisect_level([&](double r) { return intensity_ratio_eta(Position{r, 0.0, 0.0}, c); }, 0.0, ring,
                      eta_target, 1e-15 * ring);
}

/// T_s at the half-maximum radius (eta = 1), starting from the ground state
/// with the shift exactly compensated. On axis the Rydberg level is
/// decoupled (Omega_c = 0) and never fills, so the spot edge is used.
inline double spot_edge_steady_time(const SystemConfig& c, double rel_tol = 0.01, double eta = 1.0) {
  SystemConfig work = c;
  work.detuning.mode = DetuningMode::Constant;
  work.detuning.delta_c_const = -c.probe.delta_p;
  const LocalDrive d = make_drive(work, Position{radius_at_eta(c, eta), 0.0, localized_z(c)});
  // relaxation slows as kappa^2 at fixed eta; the budget follows that scaling
  const double k = kappa(c);
  const double budget = 40.0 + 3.0e-3 * k * k / eta;
  return steady_time(d, rel_tol, budget);
}

// ---------------------------------------------------------------------------
// 3D map

enum class DeltaOffset { Calibrated, Detuned };

inline const char* to_string(DeltaOffset m) { return m == DeltaOffset::Calibrated ? "calibrated" : "detuned"; }

struct MapGrid {
  double half_x = 0.0;  // grid spans centre +- half along each axis
  double half_y = 0.0;
  double half_z = 0.0;
  int n = 101;  // points per axis (odd, centre included)
};

struct IsoPoint {
  double x, y, z;
};

struct Map3D {
  MapGrid grid;
  double centre_z = 0.0;
  DeltaOffset offset = DeltaOffset::Calibrated;
  AngularFrequency s0;
  double iso_level = 0.5;
  std::vector<double> values;  // index (ix * n + iy) * n + iz
  std::vector<IsoPoint> iso_points;
  double peak = 0.0;
  double extent_x = 0.0;  // span of the iso cloud along each axis, 0 if empty
  double extent_y = 0.0;
  double extent_z = 0.0;
  bool closed = true;  // no grid face touches the super-level set

  double x(int i) const { return -grid.half_x + 2.0 * grid.half_x * i / (grid.n - 1); }
  double y(int i) const { return -grid.half_y + 2.0 * grid.half_y * i / (grid.n - 1); }
  double z(int i) const { return centre_z - grid.half_z + 2.0 * grid.half_z * i / (grid.n - 1); }
  double at(int ix, int iy, int iz) const {
    return values[(static_cast<std::size_t>(ix) * grid.n + iy) * grid.n + iz];
  }
};

struct Map3DOptions {
  double iso_level = 0.5;
  /// Evaluate the mean-field shift per voxel instead of freezing it at s0;
  /// costs one quadrature per distinct (r, z), so only for small grids.
  bool exact_shift = false;
  std::optional<QuadratureSpec> quadrature;  // defaults to scan_quadrature(config)
  Parallelism parallelism;
};

/// Grid sized from the analytic widths: spans 3x the larger width, so the
/// smaller one is covered by at least 4 samples for n >= 101.
inline MapGrid default_map_grid(const SystemConfig& c, int n = 101) {
  const double ar = analytic_a_r(std::max(kappa(c), 2.0 * std::sqrt(2.0)), c.beam.waist_w0);
  const double az = analytic_a_z(core_linewidth(c), c.detuning.delta_c0, c.beam.wavelength_c);
  const double half = 1.5 * std::max(ar, az);
  return {half, half, half, n};
}

/// sigma_rr over a Cartesian grid centred on (0, 0, 3 lambda_c / 4). The
/// detuning offset delta - Delta_c0 is s0 (calibrated) or 2 s0 (detuned); the
/// atom shift is frozen at s0 unless exact_shift is set.
inline Map3D map3d(const SystemConfig& c, AngularFrequency s0, DeltaOffset offset, const MapGrid& grid,
                   const Map3DOptions& opt = {}) {
  if (c.detuning.mode != DetuningMode::StandingWave) {
    throw ConfigError("detuning.mode", "3D map requires the standing-wave detuning");
  }
  if (grid.n < 3 || grid.n % 2 == 0) throw ConfigError("map.n", "points per axis must be odd and >= 3");
  if (!(grid.half_x > 0.0 && grid.half_y > 0.0 && grid.half_z > 0.0)) {
    throw ConfigError("map.extent", "extents must be positive");
  }
  Map3D m;
  m.grid = grid;
  m.centre_z = localized_z(c);
  m.offset = offset;
  m.s0 = s0;
  m.iso_level = opt.iso_level;

  const QuadratureSpec q = opt.quadrature.value_or(scan_quadrature(c));
  SystemConfig work = c;
  work.detuning.delta_shift = c.detuning.delta_c0 + (offset == DeltaOffset::Calibrated ? 1.0 : 2.0) * s0;

  const int n = grid.n;
  const auto nn = static_cast<std::size_t>(n);
  m.values.assign(nn * nn * nn, 0.0);
  parallel_for(nn, opt.parallelism, [&](std::size_t ix) {
    for (int iy = 0; iy < n; ++iy) {
      for (int iz = 0; iz < n; ++iz) {
        const Position p = Position::cartesian(m.x(static_cast<int>(ix)), m.y(iy), m.z(iz));
        const AngularFrequency s = opt.exact_shift ? shift_at(p, work, q) : s0;
        m.values[(ix * nn + static_cast<std::size_t>(iy)) * nn + static_cast<std::size_t>(iz)] =
            steady_sigma_rr(make_drive(work, p, s));
      }
    }
  });

  m.peak = *std::max_element(m.values.begin(), m.values.end());
  const double iso = m.iso_level;

  // cell-edge crossings along the three axes, linear interpolation
  auto push = [&](double ax, double ay, double az, double va, double bx, double by, double bz, double vb) {
    const double t = (iso - va) / (vb - va);
    m.iso_points.push_back({ax + t * (bx - ax), ay + t * (by - ay), az + t * (bz - az)});
  };
  for (int ix = 0; ix < n; ++ix) {
    for (int iy = 0; iy < n; ++iy) {
      for (int iz = 0; iz < n; ++iz) {
        const double v = m.at(ix, iy, iz);
        const bool above = v >= iso;
        if (above && (ix == 0 || iy == 0 || iz == 0 || ix == n - 1 || iy == n - 1 || iz == n - 1)) {
          m.closed = false;
        }
        if (ix + 1 < n && (m.at(ix + 1, iy, iz) >= iso) != above) {
          push(m.x(ix), m.y(iy), m.z(iz), v, m.x(ix + 1), m.y(iy), m.z(iz), m.at(ix + 1, iy, iz));
        }
        if (iy + 1 < n && (m.at(ix, iy + 1, iz) >= iso) != above) {
          push(m.x(ix), m.y(iy), m.z(iz), v, m.x(ix), m.y(iy + 1), m.z(iz), m.at(ix, iy + 1, iz));
        }
        if (iz + 1 < n && (m.at(ix, iy, iz + 1) >= iso) != above) {
          push(m.x(ix), m.y(iy), m.z(iz), v, m.x(ix), m.y(iy), m.z(iz + 1), m.at(ix, iy, iz + 1));
        }
      }
    }
  }
  if (!m.iso_points.empty()) {
    auto span_of = [&](auto coord) {
      double lo = coord(m.iso_points.front());
      double hi = lo;
      for (const IsoPoint& p : m.iso_points) {
        lo = std::min(lo, coord(p));
        hi = std::max(hi, coord(p));
      }
      return hi - lo;
    };
    m.extent_x = span_of([](const IsoPoint& p) { return p.x; });
    m.extent_y = span_of([](const IsoPoint& p) { return p.y; });
    m.extent_z = span_of([](const IsoPoint& p) { return p.z; });

    // resolution check along the axes through the peak voxel
    const auto peak_idx = static_cast<std::size_t>(std::max_element(m.values.begin(), m.values.end()) -
                                                   m.values.begin());
    const int px = static_cast<int>(peak_idx / (nn * nn));
    const int py = static_cast<int>((peak_idx / nn) % nn);
    const int pz = static_cast<int>(peak_idx % nn);
    int cx = 0;
    int cy = 0;
    int cz = 0;
    for (int i = 0; i < n; ++i) {
      cx += m.at(i, py, pz) >= iso;
      cy += m.at(px, i, pz) >= iso;
      cz += m.at(px, py, i) >= iso;
    }
    if (std::min({cx, cy, cz}) < 4) {
      throw NumericalError("map3d", "grid too coarse: fewer than 4 samples across the half-maximum width");
    }
  }
  return m;
}

}  // namespace vortexloc
