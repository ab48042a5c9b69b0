// Acceptance run: one PASS/FAIL line per criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "sbd/analysis.hpp"
#include "sbd/config.hpp"
#include "sbd/experiments.hpp"
#include "sbd/ls_pde.hpp"
#include "sbd/moments.hpp"
#include "sbd/stationary.hpp"
#include "sbd/weak_form.hpp"

using namespace sbd;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kConservationSeconds = 60.0;
constexpr double kOdePdeGap = 0.02;  // fraction of m
constexpr double kGapRatioLo = 1.6, kGapRatioHi = 2.4;
constexpr double kConvergenceError = 0.05;  // fraction of m
constexpr double kConvergenceMinutes = 30.0;
constexpr double kRatioLo = 0.45, kRatioHi = 0.55;
constexpr double kRatioSigmas = 3.0;
constexpr double kDecreaseFactor = 1.5;
constexpr double kPlateauChange = 0.25;
constexpr double kSwitchFraction = 0.5;  // switch when u < 0.5 m
constexpr double kBand = 0.1;
constexpr double kBandTime = 0.9;
constexpr double kOrderLo = 1.7, kOrderHi = 2.3;
constexpr double kResidualFactor = 3.0;

int failures = 0;

void verdict(int id, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ExperimentConfig preset_config(const std::string& name) { return parse_config(preset(name)); }

void run_guarded(int id, const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    verdict(id, false, std::string("error: ") + e.what());
  }
}

RateModel fig1_model() { return make_model(preset_config("fig1")); }

// ---------------------------------------------------------------------------

void exact_conservation() {
  auto cfg = preset_config("fig1");
  EnsembleSpec spec;
  spec.model = make_model(cfg);
  spec.eps = 0.02;
  spec.m = cfg.m;
  spec.t_end = cfg.T;
  spec.n_outputs = cfg.ensemble.n_outputs;
  spec.n_traj = cfg.ensemble.n_traj;
  spec.master_seed = cfg.ensemble.seed;
  spec.workers = 1;
  spec.check_conservation = true;
  const auto t0 = std::chrono::steady_clock::now();
  auto ens = run_ensemble(spec);
  const double secs = seconds_since(t0);
  const bool ok = ens.conservation_checks == ens.total_events && ens.mass_identity && secs < kConservationSeconds;
  verdict(1, ok,
          fmt("eps=0.02, %zu trajectories, %llu events, %llu identity checks (100%% pass required), %.1f s (< %.0f s)",
              spec.n_traj, static_cast<unsigned long long>(ens.total_events),
              static_cast<unsigned long long>(ens.conservation_checks), secs, kConservationSeconds));
}

double ode_pde_gap(std::size_t J, const MomentSeries& ode, const std::vector<double>& times) {
  LSOptions opts;
  opts.cfl = 0.9;
  opts.output_times = times;
  auto run = solve_ls(fig1_model(), initial_state(LSGrid(4.0, J), 3.0), opts);
  double gap = 0.0;
  for (const auto& r : run.series) gap = std::max(gap, std::abs(r.u - ode.at(r.t).u));
  return gap;
}

void ode_pde_cross_validation() {
  const auto times = uniform_times(1.0, 64);
  const auto ode = integrate_moments(MomentState{0.0, 0.0, 0.0, 3.0}, moment_params(fig1_model(), 3.0), times);
  const double g800 = ode_pde_gap(800, ode, times);
  const double g1600 = ode_pde_gap(1600, ode, times);
  const double ratio = g800 / g1600;
  verdict(2, g800 <= kOdePdeGap * 3.0 && ratio >= kGapRatioLo && ratio <= kGapRatioHi,
          fmt("sup|u_ODE-u_PDE| J=800: %.3e (<= %.3g), J=1600: %.3e, ratio %.3f in [%.1f, %.1f]", g800, kOdePdeGap * 3.0,
              g1600, ratio, kGapRatioLo, kGapRatioHi));
}

void convergence_and_boundary_layer() {
  auto cfg = preset_config("fig1");
  auto cc = detail::convergence_config(cfg);
  cc.workers = default_workers();
  const auto t0 = std::chrono::steady_clock::now();
  const auto tab = convergence_study(cc);
  const double minutes = seconds_since(t0) / 60.0;
  std::string errs, occ;
  for (const auto& r : tab.rows) {
    errs += fmt(" e(%g)=%.4f+-%.4f", r.eps, r.error_u, r.error_u_se);
    occ += fmt(" %g:%.4f+-%.4f", r.eps, r.occupation_k2, r.occupation_k2_se);
  }
  const double last = tab.rows.back().error_u;
  verdict(3, tab.monotone_error && last <= kConvergenceError * cfg.m && minutes < kConvergenceMinutes,
          fmt("n_traj=%zu%s; strictly decreasing=%s, e(%g)<=%.2f, %.2f min", cc.n_traj, errs.c_str(),
              tab.monotone_error ? "yes" : "no", tab.rows.back().eps, kConvergenceError * cfg.m, minutes));
  verdict(4, tab.monotone_occupation,
          fmt("eps*<k_2>_time on [0, %g] where u_ODE > rho:%s; decreasing=%s", tab.occupation_t1, occ.c_str(),
              tab.monotone_occupation ? "yes" : "no"));
}

void stationary_case3() {
  auto cfg = parse_config(read_json_file(fs::path(SBD_SOURCE_DIR) / "configs" / "stationary_below_rho.json"));
  const RateModel model = make_model(cfg);
  std::vector<FrozenBathRun> runs{run_frozen_bath(EpsilonFamily(model, cfg.eps[0]), cfg.c, cfg.burn_in, cfg.window,
                                                  cfg.n_max, cfg.batches, RandomStream(cfg.ensemble.seed, 0))};
  const auto rep = verify_stationary_measure_support(runs, model, cfg.c, cfg.n_max, cfg.burn_in_tolerance);
  bool ok = rep.case_id == 3;
  std::string rows;
  for (std::size_t n = 1; n <= 5; ++n) {
    const auto& r = rep.rows[n];
    const double z = std::abs(r.ratio - r.target) / r.ratio_se;
    ok = ok && z <= kRatioSigmas;
    rows += fmt(" n=%zu:%.4f(%.4f,z=%.2f)", n, r.ratio, r.target, z);
  }
  const double r1 = rep.rows[1].ratio;
  ok = ok && r1 >= kRatioLo && r1 <= kRatioHi;
  verdict(5, ok, fmt("eps=%g c=%g window=%g: <k_3>/<k_2>=%.4f in [%.2f, %.2f];%s (|z| <= %.0f)", cfg.eps[0], cfg.c,
                     cfg.window, r1, kRatioLo, kRatioHi, rows.c_str(), kRatioSigmas));
}

void stationary_case4() {
  auto cfg = parse_config(read_json_file(fs::path(SBD_SOURCE_DIR) / "configs" / "stationary_above_rho.json"));
  const RateModel model = make_model(cfg);
  auto runs = run_indexed(cfg.eps.size(), default_workers(), [&](std::size_t k) {
    return run_frozen_bath(EpsilonFamily(model, cfg.eps[k]), cfg.c, cfg.burn_in, cfg.window, cfg.n_max, cfg.batches,
                           RandomStream(cfg.ensemble.seed, k));
  });
  const auto rep = verify_stationary_measure_support(runs, model, cfg.c, cfg.n_max, cfg.burn_in_tolerance);
  bool ok = rep.case_id == 4 || rep.case_id == 1;
  std::string f;
  for (std::size_t n = 0; n <= 2; ++n) {
    ok = ok && rep.decrease_factor[n] >= kDecreaseFactor;
    f += fmt(" n=%zu:%.3f", n, rep.decrease_factor[n]);
  }
  verdict(6, ok, fmt("c=%g > rho, eps halving over {0.2, 0.1, 0.05}; min factor per n:%s (>= %.1f)", cfg.c, f.c_str(),
                     kDecreaseFactor));
}

void first_passage_plateau() {
  auto cfg = preset_config("fig2");
  FirstPassageConfig fp;
  fp.coefficients = [cfg](double eps) { return make_raw_coefficients(cfg, eps); };
  fp.total_mass = [m = cfg.m](double eps) { return initial_mass(m, eps); };
  fp.rho_tilde = cfg.rho_tilde;
  fp.horizon = cfg.horizon;
  fp.master_seed = cfg.ensemble.seed;
  fp.workers = default_workers();
  const auto rows = first_passage_times(fp, cfg.eps, cfg.ensemble.n_traj);
  std::string s;
  for (const auto& r : rows) s += fmt(" %g:%.4f+-%.4f", r.eps, r.mean_scaled_t0, r.se_t0);
  // Small end: the last two consecutive pairs of the grid.
  bool ok = rows.size() >= 3;
  std::string ch;
  for (std::size_t k = rows.size() - 2; k < rows.size(); ++k) {
    const double c = std::abs(rows[k].mean_scaled_t0 / rows[k - 1].mean_scaled_t0 - 1.0);
    ok = ok && c < kPlateauChange && rows[k].n_censored == 0;
    ch += fmt(" %.3f", c);
  }
  verdict(7, ok, fmt("n_traj=%zu eps*mean(T0):%s; relative changes at small end:%s (< %.2f)", cfg.ensemble.n_traj, s.c_str(),
                     ch.c_str(), kPlateauChange));
}

void metastability_direction() {
  auto cfg = preset_config("fig3");
  MetastabilityConfig mc;
  mc.model = make_model(cfg);
  mc.m = cfg.m;
  mc.eps_list = cfg.eps;
  mc.n_traj = cfg.ensemble.n_traj;
  mc.deviation_threshold = 1.0 - kSwitchFraction;
  mc.band = kBand;
  mc.horizon = cfg.horizon;
  mc.master_seed = cfg.ensemble.seed;
  mc.workers = default_workers();
  const auto tab = metastability_probe(mc);
  std::string s;
  bool band = true;
  for (const auto& r : tab.rows) {
    s += fmt("eps=%g: mean switch %.3g+-%.2g (censored %zu), min in-band fraction %.3f; ", r.eps, r.switch_time.mean,
             r.switch_time.se, r.n_censored, r.min_band_fraction);
    band = band && r.min_band_fraction >= kBandTime;
  }
  verdict(8, tab.increasing && band,
          fmt("%sincreasing=%s, every trajectory within %.0f%% of m for >= %.0f%% of pre-switch window=%s", s.c_str(),
              tab.increasing ? "yes" : "no", kBand * 100, kBandTime * 100, band ? "yes" : "no"));
}

double smooth_profile(double x) {
  const double t = (x - 1.0) / 0.5;
  if (std::abs(t) >= 1.0) return 0.0;
  const double s = 1.0 - t * t;
  return s * s * s * s;
}

// a = 1, b = 0, alpha = 0: u = u0 e^{-N t}, profile translated by u0 (1 - e^{-N t}) / N.
double characteristics_l1_error(std::size_t J) {
  RateModel model{constant_law(1.0), zero_law(), 0.0, 0.0};
  LSGrid grid(4.0, J);
  auto init = initial_state(grid, 1.0, smooth_profile);
  const double n0 = init.number(), u0 = init.u;
  LSOptions opts;
  opts.t_end = 1.0;
  opts.regime = Regime{RegimeKind::AggregationDominant, Rho::finite(0.0)};
  auto run = solve_ls(model, init, opts);
  const double shift = u0 * (1.0 - std::exp(-n0)) / n0;
  auto exact = initial_state(grid, 1.0, [&](double x) { return smooth_profile(x - shift); });
  double err = 0.0;
  for (std::size_t j = 0; j < J; ++j) err += std::abs(run.final_state.f[j] - exact.f[j]) * grid.dx;
  return err;
}

void scheme_order() {
  const double e1 = characteristics_l1_error(400), e2 = characteristics_l1_error(800);
  const double r = e1 / e2;
  verdict(9, r >= kOrderLo && r <= kOrderHi,
          fmt("L1 error J=400: %.4e, J=800: %.4e, ratio %.3f in [%.1f, %.1f]", e1, e2, r, kOrderLo, kOrderHi));
}

void weak_form() {
  const auto m = fig1_model();
  const auto dict = weak_form_dictionary();
  std::vector<std::vector<WeakResidual>> res;
  for (auto [J, K] : {std::pair<std::size_t, std::size_t>{800, 64}, {1600, 128}}) {
    LSOptions opts;
    opts.cfl = 0.9;
    opts.snapshot_times = uniform_times(1.0, K);
    auto run = solve_ls(m, initial_state(LSGrid(4.0, J), 3.0), opts);
    res.push_back(weak_form_residual<LSState>(run.snapshots, opts.snapshot_times, m, dict));
  }
  const auto est = residual_error_estimate(res[0], res[1]);
  bool ok = true;
  std::string s;
  for (std::size_t i = 0; i < dict.size(); ++i) {
    const bool pass = res[0][i].max_residual <= kResidualFactor * est[i];
    ok = ok && pass;
    s += fmt(" %s:%.2e/%.2e", dict[i].name.c_str(), res[0][i].max_residual, est[i]);
  }
  verdict(10, ok, fmt("J=800 residual / estimate (<= %.0fx):%s", kResidualFactor, s.c_str()));
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

void determinism() {
  const fs::path base = fs::temp_directory_path() / ("sbd_acceptance_" + std::to_string(::getpid()));
  bool ok = true;
  std::string s;
  for (const auto& name : preset_names()) {
    auto cfg = preset_config(name);
    auto a = run_experiment(cfg, base / (name + "_a"));
    auto doc = cfg.source;
    doc["ensemble"]["workers"] = default_workers();
    auto b = run_experiment(parse_config(doc), base / (name + "_b"));
    std::size_t n = 0;
    for (const auto& f : a.files) {
      if (f.size() < 4 || f.substr(f.size() - 4) != ".csv") continue;
      ++n;
      if (slurp(a.directory / f) != slurp(b.directory / f)) {
        ok = false;
        s += " " + name + "/" + f + " differs;";
      }
    }
    s += fmt(" %s: %zu CSV files compared;", name.c_str(), n);
  }
  std::error_code ec;
  fs::remove_all(base, ec);
  verdict(11, ok, "two runs per preset, same seed (second with more workers):" + s);
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  run_guarded(1, exact_conservation);
  run_guarded(2, ode_pde_cross_validation);
  // Criteria 3 and 4 share one study.
  try {
    convergence_and_boundary_layer();
  } catch (const std::exception& e) {
    verdict(3, false, std::string("error: ") + e.what());
    verdict(4, false, std::string("error: ") + e.what());
  }
  run_guarded(5, stationary_case3);
  run_guarded(6, stationary_case4);
  run_guarded(7, first_passage_plateau);
  run_guarded(8, metastability_direction);
  run_guarded(9, scheme_order);
  run_guarded(10, weak_form);
  run_guarded(11, determinism);
  std::printf("%d of 11 criteria failed (%.1f s)\n", failures, seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
