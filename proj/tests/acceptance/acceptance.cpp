// Acceptance suite: one PASS/FAIL line per criterion at the stated tolerances.
// Criteria listed in kKnownFailures are reported but do not fail the run;
// if one of them starts passing the run fails so the list gets updated.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "vortexloc/io.hpp"

using namespace vortexloc;
namespace fs = std::filesystem;

namespace {

const std::set<int> kKnownFailures{2, 3};

struct Report {
  bool ok = true;
  std::vector<std::string> notes;

  void check(bool cond, const std::string& what) {
    ok = ok && cond;
    notes.push_back(std::string(cond ? "ok " : "FAILED ") + what);
  }
};

std::string num(double v, int digits = 5) {
  std::ostringstream ss;
  ss.precision(digits);
  ss << v;
  return ss.str();
}

fs::path scratch() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "vortexloc-acceptance";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Runs the CLI writing JSON to `name` in the scratch directory; returns the
/// parsed document (null on failure).
io::Json cli_json(const std::string& args, const std::string& name) {
  const fs::path out = scratch() / name;
  const std::string cmd =
      std::string(VORTEX_LOCALIZE_BIN) + " " + args + " --format json --out " + out.string() + " >/dev/null 2>&1";
  const int raw = std::system(cmd.c_str());
  if (!WIFEXITED(raw) || WEXITSTATUS(raw) != 0) return nullptr;
  return io::Json::parse(slurp(out));
}

bool cli_file(const std::string& args, const std::string& name) {
  const std::string cmd = std::string(VORTEX_LOCALIZE_BIN) + " " + args + " --out " + (scratch() / name).string() +
                          " >/dev/null 2>&1";
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) && WEXITSTATUS(raw) == 0;
}

QuadratureSpec reference_grid(const SystemConfig& c) { return QuadratureSpec::in_wavelengths(c.beam.wavelength_c); }
QuadratureSpec fast_grid(const SystemConfig& c) { return QuadratureSpec::in_wavelengths(c.beam.wavelength_c, 0.02); }

double transverse_fwhm(const SystemConfig& c) { return transverse_scan(c, {}).fwhm->width; }

Report transverse_resolution() {
  Report r;
  const io::Json doc = cli_json("scan-r --kappa 500", "c1.json");
  const bool ran = !doc.is_null();
  r.check(ran, "scan-r ran");
  if (ran) {
    const double nm = doc["manifest"]["summary"]["fwhm_um"].get<double>() * 1e3;
    r.check(std::abs(nm - 4.0) <= 1.0, "scan-r kappa=500 fwhm " + num(nm) + " nm (4 +- 1)");
  }
  for (double k : {50.0, 100.0, 200.0, 500.0}) {
    const double numeric = transverse_fwhm(default_config(k));
    const double analytic = analytic_a_r(k, 1.0);
    const double rel = std::abs(analytic - numeric) / numeric;
    r.check(rel < 0.05, "kappa=" + num(k) + " analytic/numeric differ by " + num(100.0 * rel, 3) + "%");
  }
  return r;
}

Report working_point() {
  Report r;
  const SystemConfig c = default_config(180.0);
  const double nm = transverse_fwhm(c) * 1e3;
  r.check(std::abs(nm - 11.0) <= 2.0, "fwhm " + num(nm) + " nm (11 +- 2)");
  const double ts = spot_edge_steady_time(c, 0.01);
  r.check(std::abs(ts - 11.0) <= 0.2 * 11.0, "T_s " + num(ts) + " us (11 +- 20%)");
  return r;
}

Report steady_time_scaling() {
  Report r;
  double prev = 0.0;
  bool monotone = true;
  std::string list;
  double t500 = 0.0;
  for (double k : {10.0, 100.0, 180.0, 500.0}) {
    const double ts = spot_edge_steady_time(default_config(k), 0.01);
    monotone = monotone && ts > prev;
    prev = ts;
    list += (list.empty() ? "" : ", ") + num(ts, 4);
    t500 = ts;
  }
  r.check(std::abs(t500 - 86.0) <= 0.2 * 86.0, "T_s(kappa=500) " + num(t500) + " us (86 +- 20%)");
  r.check(monotone, "T_s increasing over kappa 10,100,180,500: " + list + " us");
  return r;
}

Report delta_calibration() {
  Report r;
  const double targets[][2] = {{10.0, 37.77}, {100.0, 31.15}, {500.0, 30.063}};
  for (const auto& [k, target] : targets) {
    const std::string ks = num(k);
    const io::Json full = cli_json("calibrate-delta --kappa " + ks, "c4-full-" + ks + ".json");
    const io::Json fast = cli_json("calibrate-delta --kappa " + ks + " --grid-spacing 0.02", "c4-fast-" + ks + ".json");
    if (full.is_null() || fast.is_null()) {
      r.check(false, "calibrate-delta kappa=" + ks + " ran");
      continue;
    }
    const double d_full = full["manifest"]["summary"]["delta_mhz"].get<double>();
    const double d_fast = fast["manifest"]["summary"]["delta_mhz"].get<double>();
    const double off = d_full - 30.0;
    const double want = target - 30.0;
    r.check(std::abs(off - want) <= 0.02 * want,
            "kappa=" + ks + " delta/2pi " + num(d_full, 7) + " MHz, offset " + num(off, 5) + " vs " + num(want, 5));
    const double agree = std::abs((d_fast - 30.0) - off) / off;
    r.check(agree < 0.01, "kappa=" + ks + " 0.02 grid offset within " + num(100.0 * agree, 3) + "% of full grid");
  }
  return r;
}

Report shift_at_working_point() {
  Report r;
  const SystemConfig c = default_config(180.0);
  const Calibration cal = calibrate_delta_full(c, reference_grid(c));
  const double s0 = cal.shift.mhz();
  r.check(std::abs(s0 - 0.42) <= 0.05 * 0.42, "s0/2pi " + num(s0) + " MHz (0.42 +- 5%)");
  return r;
}

Report oam_broadening() {
  Report r;
  const std::vector<int> ls{1, 2, 3, 4, 5};
  const auto widths = oam_broadening_scan(default_config(10.0), ls);
  bool increasing = true;
  std::string list;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (i > 0) increasing = increasing && widths[i].fwhm > widths[i - 1].fwhm;
    list += (list.empty() ? "" : ", ") + num(widths[i].fwhm, 4);
  }
  const double w5 = widths.back().fwhm;
  r.check(std::abs(w5 - 1.39) <= 0.05 * 1.39, "l=5 fwhm " + num(w5) + " um (1.39 +- 5%)");
  r.check(increasing, "fwhm increasing in l: " + list + " um");
  return r;
}

Report longitudinal_localization() {
  Report r;
  double prev = 1e300;
  bool decreasing = true;
  for (double k : {10.0, 100.0, 500.0}) {
    SystemConfig c = default_config(k);
    const Calibration cal = calibrate_delta_full(c, fast_grid(c));
    c.detuning.delta_shift = cal.delta;
    const double l = c.beam.wavelength_c;
    const ScanProfile wide = longitudinal_scan(c, cal.shift, 0.0, 3.0 * l, 6001);
    const std::vector<double> peaks = local_maxima(wide);
    bool placed = peaks.size() == 3;
    for (std::size_t n = 0; placed && n < peaks.size(); ++n) {
      placed = std::abs(peaks[n] - (0.75 + n) * l) <= 3.0 * l / 6000.0;
    }
    r.check(placed, "kappa=" + num(k) + " peaks at (3/4 + n) lambda_c for n = 0,1,2");

    const ScanProfile p = longitudinal_scan(c, cal.shift, 0.25 * l, 1.25 * l, 2001);
    const double az = p.fwhm->width;
    const double analytic = analytic_a_z(core_linewidth(c), c.detuning.delta_c0, l);
    const double rel = std::abs(az - analytic) / analytic;
    r.check(rel < 0.05, "kappa=" + num(k) + " a_z " + num(az * 1e3) + " nm vs analytic " + num(analytic * 1e3) +
                            " nm (" + num(100.0 * rel, 3) + "%)");
    decreasing = decreasing && az < prev;
    prev = az;
    if (k == 500.0) {
      r.check(az >= 0.5 * 0.0022 && az <= 2.0 * 0.0022, "kappa=500 a_z " + num(az * 1e3) + " nm within 2x of 2.2 nm");
    }
  }
  r.check(decreasing, "a_z decreasing over kappa 10,100,500");
  return r;
}

Report antiblockade_ordering() {
  Report r;
  auto scan = [](const SystemConfig& c, Antiblockade mode) {
    TransverseScanOptions opt;
    opt.mode = mode;
    return transverse_scan(c, opt);
  };
  for (double k : {10.0, 100.0, 500.0}) {
    SystemConfig c = default_config(k);
    c.beam.waist_w0 = 5.0;
    const double part = scan(c, Antiblockade::Partial).fwhm->width;
    const double perf = scan(c, Antiblockade::Perfect).fwhm->width;
    r.check(part < perf, "W0=5 kappa=" + num(k) + " partial " + num(part) + " um < perfect " + num(perf) + " um");
  }
  const SystemConfig c = default_config(100.0);
  const ScanProfile part = scan(c, Antiblockade::Partial);
  const ScanProfile perf = scan(c, Antiblockade::Perfect);
  double worst = 0.0;
  for (std::size_t i = 0; i < part.sigma.size(); ++i) worst = std::max(worst, std::abs(part.sigma[i] - perf.sigma[i]));
  r.check(worst <= 0.01, "W0=1 kappa=100 max pointwise difference " + num(worst, 3));
  return r;
}

Report map_sensitivity() {
  Report r;
  for (double k : {10.0, 100.0, 500.0}) {
    SystemConfig c = default_config(k);
    const Calibration cal = calibrate_delta_full(c, fast_grid(c));
    const MapGrid grid = default_map_grid(c, 101);
    const Map3D m_cal = map3d(c, cal.shift, DeltaOffset::Calibrated, grid);
    const Map3D m_det = map3d(c, cal.shift, DeltaOffset::Detuned, grid);
    const bool vanished = m_det.iso_points.empty();
    const bool larger = vanished || (m_det.extent_x > m_cal.extent_x || m_det.extent_z > m_cal.extent_z);
    r.check(m_cal.closed && !m_cal.iso_points.empty(), "kappa=" + num(k) + " calibrated half-max surface closed");
    r.check(m_det.peak < 1.0, "kappa=" + num(k) + " detuned peak " + num(m_det.peak, 4) + " < 1");
    r.check(larger, "kappa=" + num(k) + " detuned half-max extent " +
                        (vanished ? std::string("vanished") : "x " + num(m_det.extent_x) + " z " + num(m_det.extent_z)) +
                        " vs calibrated x " + num(m_cal.extent_x) + " z " + num(m_cal.extent_z) + " um");
  }
  return r;
}

Report property_suites() {
  Report r;
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_ode = 0.0;
  double worst_trace = 0.0;
  for (int i = 0; i < 20; ++i) {
    LocalDrive d;
    d.omega_p = kTwoPi * (2.0 + 8.0 * u(rng));
    d.omega_c = std::polar(kTwoPi * (5.0 + 25.0 * u(rng)), kTwoPi * u(rng));
    d.gamma_e = AngularFrequency::from_mhz(6.05);
    d.gamma = 0.5 * d.gamma_e;
    d.delta_p = AngularFrequency::from_mhz(-5.0 + 10.0 * u(rng));
    d.delta_c = AngularFrequency::from_mhz(-10.0 + 20.0 * u(rng));
    d.s_shift = AngularFrequency::from_mhz(5.0 * u(rng));
    const BlochState end = evolve(BlochState::ground(), d, 100.0, max_stable_step(d), [&](double, const BlochState& s) {
      worst_trace = std::max(worst_trace, std::abs(s.trace() - 1.0));
    });
    worst_ode = std::max(worst_ode, std::abs(end.rr - steady_sigma_rr(d)));
  }
  r.check(worst_ode <= 1e-6, "ODE vs closed form on 20 random drives, max " + num(worst_ode, 3));
  r.check(worst_trace <= 1e-9, "trace conservation, max drift " + num(worst_trace, 3));

  {
    SystemConfig c = default_config(100.0);
    const Calibration cal = calibrate_delta_full(c, fast_grid(c));
    c.detuning.delta_shift = cal.delta;
    const QuadratureSpec q = reference_grid(c);
    const Position atom{0.0, 0.0, localized_z(c)};
    const double s = shift_at(atom, c, q).value();
    const double s_half = shift_at(atom, c, q.halved()).value();
    const double rel = std::abs(s - s_half) / s_half;
    r.check(rel < 0.01, "quadrature halving changes the shift by " + num(100.0 * rel, 3) + "%");
  }

  const bool ran = cli_file("scan-r --kappa 180", "p-scan.csv") &&
                   cli_file("noise --kappa 180 --kind intensity --std 0 --seed 7", "p-noise.csv");
  bool same_sigma = ran;
  if (ran) {
    std::istringstream a(slurp(scratch() / "p-scan.csv"));
    std::istringstream b(slurp(scratch() / "p-noise.csv"));
    std::string la;
    std::string lb;
    while (std::getline(a, la) && std::getline(b, lb)) {
      if (la.rfind('#', 0) == 0) continue;
      auto third = [](const std::string& line) {
        const auto p1 = line.find(',');
        const auto p2 = line.find(',', p1 + 1);
        const auto p3 = line.find(',', p2 + 1);
        return line.substr(p2 + 1, p3 == std::string::npos ? std::string::npos : p3 - p2 - 1);
      };
      same_sigma = same_sigma && third(la) == third(lb);
    }
  }
  r.check(same_sigma, "zero-noise sigma column byte-identical to scan-r");

  const std::vector<std::string> runs{
      "scan-r --kappa 100 --mode partial --samples 101 --grid-spacing 0.02",
      "map3d --kappa 500 --map-points 41 --grid-spacing 0.02",
      "noise --kappa 180 --kind frequency --std 0.5 --seed 11",
      "shift --kappa 100 --grid-spacing 0.02 --range-samples 3",
      "calibrate-delta --kappa 100 --grid-spacing 0.02",
  };
  bool invariant = true;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const std::string a = "t" + std::to_string(i) + "-1.csv";
    const std::string b = "t" + std::to_string(i) + "-4.csv";
    const bool ok = cli_file(runs[i] + " --threads 1", a) && cli_file(runs[i] + " --threads 4", b) &&
                    slurp(scratch() / a) == slurp(scratch() / b);
    if (!ok) r.notes.push_back("thread variance in: " + runs[i]);
    invariant = invariant && ok;
  }
  r.check(invariant, "outputs byte-identical at --threads 1 and 4 for " + std::to_string(runs.size()) + " subcommands");

  const SystemConfig c = default_config(180.0);
  NoiseSpec spec;
  spec.kind = NoiseKind::Frequency;
  spec.std_dev = kTwoPi * 0.5;
  spec.seed = 7;
  const NoisyScan n = noisy_transverse_scan(c, spec, c.beam.waist_w0, 401);
  const double core = n.spread[n.spread.size() / 2];
  const double edge = n.spread.back();
  r.check(core >= 5.0 * edge, "frequency-noise spread r=0 " + num(core, 3) + " vs r=W0 " + num(edge, 3));
  return r;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Report()>>> criteria{
      {"transverse resolution", transverse_resolution},
      {"kappa=180 working point", working_point},
      {"steady-time scaling", steady_time_scaling},
      {"delta calibration", delta_calibration},
      {"s0 at kappa=180", shift_at_working_point},
      {"OAM broadening", oam_broadening},
      {"longitudinal localization", longitudinal_localization},
      {"antiblockade ordering", antiblockade_ordering},
      {"3D map sensitivity", map_sensitivity},
      {"property suites", property_suites},
  };

  int unexpected = 0;
  int passed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    const auto t0 = std::chrono::steady_clock::now();
    Report rep;
    try {
      rep = criteria[i].second();
    } catch (const std::exception& e) {
      rep.ok = false;
      rep.notes.push_back(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool known = kKnownFailures.count(id) > 0;
    std::cout << (rep.ok ? "PASS" : "FAIL") << " criterion " << id << ": " << criteria[i].first
              << (known && !rep.ok ? " (known failure)" : "") << " [" << num(secs, 3) << " s]\n";
    for (const auto& note : rep.notes) std::cout << "    " << note << '\n';
    std::cout.flush();
    if (rep.ok) ++passed;
    if (rep.ok == known) ++unexpected;  // a failure not on the list, or a listed failure now passing
  }
  std::cout << passed << "/" << criteria.size() << " criteria passed; known failures: 2, 3; unexpected outcomes: "
            << unexpected << '\n';
  fs::remove_all(scratch());
  return unexpected == 0 ? 0 : 1;
}
