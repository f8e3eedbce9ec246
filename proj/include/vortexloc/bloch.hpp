#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "vortexloc/config.hpp"
#include "vortexloc/errors.hpp"
#include "vortexloc/fields.hpp"
#include "vortexloc/units.hpp"

namespace vortexloc {

/// Density-matrix components of one (super)atom in the ladder g - e - r.
struct BlochState {
  double gg = 1.0;
  double ee = 0.0;
  double rr = 0.0;
  std::complex<double> ge;
  std::complex<double> er;
  std::complex<double> gr;

  static BlochState ground() { return {}; }

  double trace() const { return gg + ee + rr; }

  BlochState& operator+=(const BlochState& o) {
    gg += o.gg;
    ee += o.ee;
    rr += o.rr;
    ge += o.ge;
    er += o.er;
    gr += o.gr;
    return *this;
  }
  friend BlochState operator+(BlochState a, const BlochState& b) { return a += b; }
  friend BlochState operator*(double k, const BlochState& s) {
    return {k * s.gg, k * s.ee, k * s.rr, k * s.ge, k * s.er, k * s.gr};
  }
};

/// Fields, detunings and rates acting on one atom. `gamma` is the coherence
/// dephasing gamma_ge = gamma_er; gamma_gr is taken as Gamma_r / 2.
struct LocalDrive {
  double omega_p = 0.0;
  std::complex<double> omega_c;
  AngularFrequency delta_p;
  AngularFrequency delta_c;
  AngularFrequency s_shift;
  AngularFrequency gamma;
  AngularFrequency gamma_e;
  AngularFrequency gamma_r;

  double probe_intensity() const { return omega_p * omega_p; }
  double control_intensity() const { return std::norm(omega_c); }
  /// Delta_p + Delta_c - s.
  AngularFrequency two_photon_detuning() const { return delta_p + delta_c - s_shift; }
};

/// Drive seen by an atom at `pos`, with the Rydberg level shifted by `s`.
inline LocalDrive make_drive(const SystemConfig& c, const Position& pos,
                             AngularFrequency s = AngularFrequency{}) {
  LocalDrive d;
  d.omega_p = c.probe.omega_p0.value();
  d.omega_c = lg_amplitude(pos, c.beam);
  d.delta_p = c.probe.delta_p;
  d.delta_c = detuning_profile(pos.z, c.detuning);
  d.s_shift = s;
  d.gamma = c.medium.dephasing();
  d.gamma_e = c.medium.gamma_e;
  d.gamma_r = c.medium.gamma_r;
  return d;
}

/// Time derivative of the Bloch vector. The r population follows from trace
/// conservation.
inline BlochState bloch_rhs(const BlochState& st, const LocalDrive& d) {
  using cd = std::complex<double>;
  constexpr cd i(0.0, 1.0);
  const double op = d.omega_p;  // real probe amplitude
  const cd oc = d.omega_c;
  const cd occ = std::conj(oc);
  const double gam = d.gamma.value();
  const double ge_rate = d.gamma_e.value();
  const double gr_rate = d.gamma_r.value();
  const double gam_gr = 0.5 * gr_rate;
  const double dp = d.delta_p.value();
  const double dc_s = (d.delta_c - d.s_shift).value();

  BlochState out;
  out.gg = ge_rate * st.ee - 2.0 * std::imag(op * st.ge);
  out.ee = gr_rate * st.rr - ge_rate * st.ee - 2.0 * std::imag(occ * st.er) +
           2.0 * std::imag(op * st.ge);
  out.rr = -(out.gg + out.ee);
  out.ge = (i * dp - gam) * st.ge + i * (occ * st.gr - op * (st.ee - st.gg));
  out.er = (i * dc_s - gam) * st.er - i * (op * st.gr + oc * (st.rr - st.ee));
  out.gr = (i * (dp + dc_s) - gam_gr) * st.gr + i * (oc * st.ge - op * st.er);
  return out;
}

/// Largest rate in the drive; the RK4 step must resolve it.
inline double fastest_rate(const LocalDrive& d) {
  return std::max({std::abs(d.omega_c), std::abs(d.omega_p), d.gamma.value(), d.gamma_e.value(),
                   std::abs(d.delta_p.value()), std::abs((d.delta_c - d.s_shift).value()),
                   std::abs(d.two_photon_detuning().value())});
}

inline double max_stable_step(const LocalDrive& d) { return 0.05 / fastest_rate(d); }

/// Fixed-step classical RK4 from `initial` to `t_end` (us). `observe(t, state)`
/// is called for t = 0 and after every step. Population excursions beyond
/// [0, 1] by more than 1e-6 raise NumericalError rather than being clipped.
template <class Observer>
BlochState evolve(const BlochState& initial, const LocalDrive& drive, double t_end, double dt,
                  Observer&& observe) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw NumericalError("evolve", "dt must be positive");
  if (dt > max_stable_step(drive) * (1.0 + 1e-12)) {
    throw NumericalError("evolve", "step size does not resolve the fastest rate; need dt <= " +
                                       std::to_string(max_stable_step(drive)));
  }
  const auto steps = static_cast<long long>(std::ceil(t_end / dt - 1e-9));
  BlochState st = initial;
  observe(0.0, st);
  for (long long n = 0; n < steps; ++n) {
    const BlochState k1 = bloch_rhs(st, drive);
    const BlochState k2 = bloch_rhs(st + (0.5 * dt) * k1, drive);
    const BlochState k3 = bloch_rhs(st + (0.5 * dt) * k2, drive);
    const BlochState k4 = bloch_rhs(st + dt * k3, drive);
    st += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

    for (double p : {st.gg, st.ee, st.rr}) {
      if (!std::isfinite(p)) throw NumericalError("evolve", "non-finite state");
      if (p < -1e-6 || p > 1.0 + 1e-6) {
        throw NumericalError("evolve", "population left [0, 1]; integration failed");
      }
    }
    observe(static_cast<double>(n + 1) * dt, st);
  }
  return st;
}

struct TrajectoryPoint {
  double t;
  BlochState state;
};

/// Convenience overload recording every `stride`-th step.
inline std::vector<TrajectoryPoint> evolve(const BlochState& initial, const LocalDrive& drive,
                                           double t_end, double dt, int stride = 1) {
  std::vector<TrajectoryPoint> out;
  long long n = 0;
  evolve(initial, drive, t_end, dt, [&](double t, const BlochState& s) {
    if (n++ % stride == 0) out.push_back({t, s});
  });
  return out;
}

/// Closed-form steady Rydberg population for the drive (gamma_gr
/// neglected).
inline double steady_sigma_rr(const LocalDrive& d) {
  const double ip = d.probe_intensity();
  const double ic = d.control_intensity();
  const double dp = d.delta_p.value();
  const double two = d.two_photon_detuning().value();
  const double g = d.gamma.value();
  const double num = ip * (ip + ic);
  const double den = (ip + ic) * (ip + ic) - 2.0 * dp * two * ic + (g * g + dp * dp + 2.0 * ip) * two * two;
  if (!(den > 0.0) || !std::isfinite(den)) {
    throw NumericalError("steady_sigma_rr", "degenerate drive: zero denominator");
  }
  return num / den;
}

/// Perfect antiblockade limit 1 / (1 + eta).
inline double antiblockade_sigma(double eta) {
  if (!(eta >= 0.0)) throw NumericalError("antiblockade_sigma", "eta must be non-negative");
  return 1.0 / (1.0 + eta);
}

/// Lorentzian approximation valid near the core where I_c << I_p.
inline double approx_sigma(AngularFrequency delta_c, AngularFrequency s, AngularFrequency w) {
  if (!(w.value() > 0.0)) throw NumericalError("approx_sigma", "linewidth must be positive");
  const double x = (delta_c - s) / w;
  return 1.0 / (1.0 + x * x);
}

/// Half-peak width w = (I_p + I_c) / sqrt(gamma^2 + Delta_p^2 + 2 I_p).
inline AngularFrequency linewidth_w(const LocalDrive& d) {
  const double ip = d.probe_intensity();
  const double g = d.gamma.value();
  const double dp = d.delta_p.value();
  const double den = g * g + dp * dp + 2.0 * ip;
  if (!(den > 0.0)) throw NumericalError("linewidth_w", "gamma^2 + Delta_p^2 + 2 I_p must be positive");
  return AngularFrequency((ip + d.control_intensity()) / std::sqrt(den));
}

struct DarkState {
  std::complex<double> amplitude_r;
  std::complex<double> amplitude_g;
};

/// |D> = (Omega_p |r> - Omega_c |g>) / sqrt(Omega_p^2 + |Omega_c|^2).
inline DarkState dark_state_weights(double omega_p, std::complex<double> omega_c) {
  const double norm = std::sqrt(omega_p * omega_p + std::norm(omega_c));
  if (!(norm > 0.0)) throw NumericalError("dark_state_weights", "both fields are zero");
  return {std::complex<double>(omega_p / norm, 0.0), -omega_c / norm};
}

/// Time (us) after which sigma_rr stays inside the band
/// |sigma_rr(t) - sigma_rr(inf)| <= rel_tol * sigma_rr(inf), starting from the
/// ground state. The band must hold over the last 20 % of `t_budget`,
/// otherwise NumericalError is thrown. `dt <= 0` picks the largest stable step.
inline double steady_time(const LocalDrive& drive, double rel_tol, double t_budget, double dt = 0.0) {
  if (!(rel_tol > 0.0 && rel_tol <= 0.1)) {
    throw NumericalError("steady_time", "rel_tol must lie in (0, 0.1]");
  }
  const double target = steady_sigma_rr(drive);
  const double band = rel_tol * target;
  if (dt <= 0.0) dt = max_stable_step(drive);
  double last_outside = -1.0;
  double t_settle = 0.0;
  bool outside = false;
  evolve(BlochState::ground(), drive, t_budget, dt, [&](double t, const BlochState& s) {
    if (std::abs(s.rr - target) > band) {
      outside = true;
      last_outside = t;
    } else if (outside) {
      outside = false;
      t_settle = t;
    }
  });
  if (last_outside >= 0.8 * t_budget) {
    throw NumericalError("steady_time", "sigma_rr did not settle within the time budget");
  }
  return t_settle;
}

}  // namespace vortexloc
