#pragma once

// Ensemble statistics, flat distances between measures, and the eps -> 0
// studies comparing the stochastic chain with its deterministic limit.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sbd/chain.hpp"
#include "sbd/ensemble.hpp"
#include "sbd/error.hpp"
#include "sbd/kinetics.hpp"
#include "sbd/ls_pde.hpp"
#include "sbd/moments.hpp"
#include "sbd/ssa.hpp"
#include "sbd/test_functions.hpp"

namespace sbd {

// ---------------------------------------------------------------------------
// Ensembles

struct EnsembleSpec {
  RateModel model;
  double eps = 0.1;
  double m = 1.0;  ///< M = round(m / eps^2) free particles at t = 0
  double t_end = 1.0;
  std::size_t n_outputs = 64;
  std::size_t n_traj = 10;
  std::uint64_t master_seed = 1;
  std::uint64_t stream_offset = 0;
  unsigned workers = 1;
  std::optional<OccupationSpec> occupation;
  bool keep_final_snapshots = false;
  bool check_conservation = false;
  std::uint64_t event_budget = 2'000'000'000ULL;
};

inline Count initial_mass(double m, double eps) { return static_cast<Count>(std::llround(m / (eps * eps))); }

struct EnsembleSummary {
  double eps = 0.0;
  std::size_t n_traj = 0;
  Count total_mass = 0;
  std::vector<double> times;
  std::vector<MeanSe> u, number, mass;
  std::vector<MeanSe> occupation;  ///< per n: time average of eps k_{n+2} across trajectories
  std::vector<EmpiricalMeasure> final_snapshots;
  std::vector<std::vector<double>> u_paths;  ///< per trajectory u at the output times
  std::uint64_t total_events = 0;
  std::uint64_t max_events = 0;
  std::uint64_t conservation_checks = 0;
  /// Exact integer identity n1 + sum i k_i == M at every output of every trajectory.
  bool mass_identity = true;
};

inline EnsembleSummary run_ensemble(const EnsembleSpec& spec) {
  require(spec.n_traj >= 2, ErrorKind::InvalidArgument, "an ensemble needs at least two trajectories");
  require(spec.n_outputs >= 1 && spec.t_end > 0.0, ErrorKind::InvalidArgument, "need t_end > 0 and outputs");
  const EpsilonFamily fam(spec.model, spec.eps);
  const Count M = initial_mass(spec.m, spec.eps);
  TrajectoryOptions opts;
  opts.output_times = uniform_times(spec.t_end, spec.n_outputs);
  if (spec.keep_final_snapshots) opts.snapshot_times = {spec.t_end};
  opts.occupation = spec.occupation;
  opts.check_conservation = spec.check_conservation;
  opts.event_budget = spec.event_budget;
  auto recs = run_indexed(spec.n_traj, spec.workers, [&](std::size_t i) {
    return run_trajectory(ChainState::pure_monomer(M), RescaledMode{fam}, StopRule::end_time(spec.t_end), opts,
                          RandomStream(spec.master_seed, spec.stream_offset + i));
  });
  EnsembleSummary out;
  out.eps = spec.eps;
  out.n_traj = spec.n_traj;
  out.total_mass = M;
  out.times = opts.output_times;
  const std::size_t T = out.times.size();
  std::vector<double> xs(spec.n_traj);
  auto column = [&](auto get) {
    std::vector<MeanSe> col(T);
    for (std::size_t k = 0; k < T; ++k) {
      for (std::size_t i = 0; i < spec.n_traj; ++i) xs[i] = get(recs[i].series.at(k));
      col[k] = mean_se(xs);
    }
    return col;
  };
  out.u = column([](const SeriesRow& r) { return r.u; });
  out.number = column([](const SeriesRow& r) { return r.number; });
  out.mass = column([](const SeriesRow& r) { return r.mass; });
  if (spec.occupation) {
    out.occupation.resize(spec.occupation->n_max + 1);
    for (std::size_t n = 0; n <= spec.occupation->n_max; ++n) {
      for (std::size_t i = 0; i < spec.n_traj; ++i) xs[i] = recs[i].occupation->time_average(n);
      out.occupation[n] = mean_se(xs);
    }
  }
  for (auto& r : recs) {
    out.total_events += r.events;
    out.max_events = std::max(out.max_events, r.events);
    out.conservation_checks += r.conservation_checks;
    std::vector<double> path;
    for (const auto& row : r.series) {
      path.push_back(row.u);
      if (row.monomers + row.cluster_mass != M) out.mass_identity = false;
    }
    out.u_paths.push_back(std::move(path));
    if (spec.keep_final_snapshots) out.final_snapshots.push_back(std::move(r.snapshots.at(0)));
  }
  return out;
}

/// Ensemble mean measure: the atoms of all snapshots with weights divided by n.
inline EmpiricalMeasure average_measure(std::span<const EmpiricalMeasure> snaps) {
  require(!snaps.empty(), ErrorKind::InvalidArgument, "no snapshots to average");
  EmpiricalMeasure out;
  out.eps = snaps[0].eps;
  const double w = 1.0 / static_cast<double>(snaps.size());
  for (const auto& s : snaps) {
    for (const auto& a : s.atoms) out.atoms.push_back({a.x, a.weight * w});
    out.u += s.u * w;
    out.m += s.m * w;
  }
  std::sort(out.atoms.begin(), out.atoms.end(), [](const Atom& l, const Atom& r) { return l.x < r.x; });
  std::vector<Atom> merged;
  for (const auto& a : out.atoms) {
    if (!merged.empty() && merged.back().x == a.x)
      merged.back().weight += a.weight;
    else
      merged.push_back(a);
  }
  out.atoms = std::move(merged);
  return out;
}

// ---------------------------------------------------------------------------
// Flat distance

struct MeasureDistance {
  double flat_metric = 0.0;
  std::size_t argmax = 0;  ///< dictionary index attaining the sup
  double mass_gap = 0.0;   ///< |<mu, x> - <f, x>|
  double number_gap = 0.0; ///< |<mu, 1> - <f, 1>|
};

template <class M>
concept PairableMeasure = requires(const M& m) {
  { m.pair([](double) { return 1.0; }) } -> std::convertible_to<double>;
};

/// sup over the dictionary of |<(1 + x) mu, phi> - <(1 + x) nu, phi>|.
template <PairableMeasure A, PairableMeasure B>
MeasureDistance flat_distance(const A& mu, const B& nu, std::span<const TestFunction> dict) {
  MeasureDistance d;
  for (std::size_t k = 0; k < dict.size(); ++k) {
    const auto& phi = dict[k].phi;
    auto weighted = [&phi](double x) { return (1.0 + x) * phi(x); };
    const double gap = std::abs(mu.pair(weighted) - nu.pair(weighted));
    if (gap > d.flat_metric) {
      d.flat_metric = gap;
      d.argmax = k;
    }
  }
  d.mass_gap = std::abs(mu.pair([](double x) { return x; }) - nu.pair([](double x) { return x; }));
  d.number_gap = std::abs(mu.pair([](double) { return 1.0; }) - nu.pair([](double) { return 1.0; }));
  return d;
}

template <PairableMeasure A, PairableMeasure B>
MeasureDistance flat_distance(const A& mu, const B& nu) {
  static const std::vector<TestFunction> dict = flat_dictionary();
  return flat_distance(mu, nu, std::span<const TestFunction>(dict));
}

// ---------------------------------------------------------------------------
// Convergence study

struct ConvergenceConfig {
  RateModel model;
  double m = 3.0;
  double t_end = 1.0;
  std::vector<double> eps_list;
  std::size_t n_traj = 50;
  std::size_t n_outputs = 64;
  std::uint64_t master_seed = 1;
  unsigned workers = 1;
  std::size_t pde_cells = 800;
  double pde_x_max = 0.0;  ///< 0: chosen from the largest characteristic speed
  double cfl = 0.9;
  std::size_t occupation_n_max = 4;
  double deviation_flag = 0.1;  ///< flag trajectories whose u leaves m (1 +- this)
  bool check_conservation = false;
  std::uint64_t event_budget = 2'000'000'000ULL;
};

struct ConvergenceRow {
  double eps = 0.0;
  std::size_t n_traj = 0;
  double error_u = 0.0;         ///< sup_t |mean u - u_ref|
  double error_u_se = 0.0;      ///< standard error of mean u at the worst time
  double flat = 0.0;            ///< flat distance of the final mean measure to the PDE profile
  double mass_gap = 0.0;
  double number_gap = 0.0;
  double occupation_k2 = 0.0;   ///< time average of eps k_2 on the window where u_ref > rho
  double occupation_k2_se = 0.0;
  std::optional<double> order;  ///< log2(e(eps) / e(eps / 2)) scaled to the actual ratio
  std::uint64_t events = 0;
  std::size_t flagged = 0;      ///< trajectories leaving the deviation band
  bool mass_identity = true;
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;
  std::vector<double> times;
  std::vector<double> u_ref;
  std::vector<double> number_ref;
  double occupation_t1 = 0.0;    ///< end of the window where u_ref > rho
  bool reference_is_ode = false;
  bool monotone_error = false;   ///< error_u strictly decreasing along eps_list
  bool monotone_occupation = false;
  std::vector<EnsembleSummary> ensembles;
  LSRun pde;
};

/// Domain large enough that no cluster reaches x_max by t_end.
inline double default_x_max(const RateModel& model, double m, double t_end) {
  double x = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double v = std::max(0.0, model.a(x) * m - model.b(x));
    const double next = 1.0 + 1.5 * v * t_end;
    if (next <= x) break;
    x = next;
  }
  return x;
}

inline ConvergenceTable convergence_study(const ConvergenceConfig& cfg) {
  require(!cfg.eps_list.empty(), ErrorKind::InvalidArgument, "empty eps list");
  require(cfg.n_traj >= 2, ErrorKind::InvalidArgument, "n_traj must be >= 2");
  ConvergenceTable tab;
  tab.times = uniform_times(cfg.t_end, cfg.n_outputs);
  const Regime regime = classify_regime(cfg.model);

  // PDE reference; for size-independent rates the moment ODE refines u and <f, 1>.
  const double x_max = cfg.pde_x_max > 0.0 ? cfg.pde_x_max : default_x_max(cfg.model, cfg.m, cfg.t_end);
  LSOptions lo;
  lo.t_end = cfg.t_end;
  lo.cfl = cfg.cfl;
  lo.output_times = tab.times;
  lo.snapshot_times = {cfg.t_end};
  tab.pde = solve_ls(cfg.model, initial_state(LSGrid(x_max, cfg.pde_cells), cfg.m), lo);
  const bool incoming_at_start = regime.rho.compare(cfg.m) > 0;
  if (incoming_at_start && tab.pde.crossing_time)
    fail(ErrorKind::RegimeExit, "the reference crosses rho at t = " + std::to_string(*tab.pde.crossing_time) +
                                    "; shorten the window");
  tab.u_ref.resize(tab.times.size());
  tab.number_ref.resize(tab.times.size());
  for (std::size_t k = 0; k < tab.times.size(); ++k) {
    tab.u_ref[k] = tab.pde.series[k].u;
    tab.number_ref[k] = tab.pde.series[k].number;
  }
  if (cfg.model.size_independent() && incoming_at_start) {
    auto ode = integrate_moments(MomentState{0.0, 0.0, 0.0, cfg.m}, moment_params(cfg.model, cfg.m), tab.times);
    if (ode.regime_exit) fail(ErrorKind::RegimeExit, "the moment ODE reaches rho inside the window");
    for (std::size_t k = 0; k < tab.times.size(); ++k) {
      tab.u_ref[k] = ode.rows[k].u;
      tab.number_ref[k] = ode.rows[k].N;
    }
    tab.reference_is_ode = true;
  }
  // Window where the reference stays strictly above rho.
  tab.occupation_t1 = 0.0;
  for (std::size_t k = 0; k < tab.times.size() && regime.rho.compare(tab.u_ref[k]) > 0; ++k) tab.occupation_t1 = tab.times[k];

  for (std::size_t e = 0; e < cfg.eps_list.size(); ++e) {
    EnsembleSpec spec;
    spec.model = cfg.model;
    spec.eps = cfg.eps_list[e];
    spec.m = cfg.m;
    spec.t_end = cfg.t_end;
    spec.n_outputs = cfg.n_outputs;
    spec.n_traj = cfg.n_traj;
    spec.master_seed = cfg.master_seed;
    spec.stream_offset = static_cast<std::uint64_t>(e) << 32;
    spec.workers = cfg.workers;
    spec.keep_final_snapshots = true;
    spec.check_conservation = cfg.check_conservation;
    spec.event_budget = cfg.event_budget;
    if (tab.occupation_t1 > 0.0) spec.occupation = OccupationSpec{0.0, tab.occupation_t1, cfg.occupation_n_max, 1};
    auto ens = run_ensemble(spec);

    ConvergenceRow row;
    row.eps = spec.eps;
    row.n_traj = spec.n_traj;
    for (std::size_t k = 0; k < tab.times.size(); ++k) {
      const double err = std::abs(ens.u[k].mean - tab.u_ref[k]);
      if (err > row.error_u) {
        row.error_u = err;
        row.error_u_se = ens.u[k].se;
      }
    }
    const auto mean_mu = average_measure(ens.final_snapshots);
    const auto d = flat_distance(mean_mu, tab.pde.snapshots.at(0));
    row.flat = d.flat_metric;
    row.mass_gap = d.mass_gap;
    row.number_gap = d.number_gap;
    if (!ens.occupation.empty()) {
      row.occupation_k2 = ens.occupation[0].mean;
      row.occupation_k2_se = ens.occupation[0].se;
    }
    row.events = ens.total_events;
    row.mass_identity = ens.mass_identity;
    for (const auto& path : ens.u_paths)
      if (std::any_of(path.begin(), path.end(), [&](double u) { return std::abs(u - cfg.m) > cfg.deviation_flag * cfg.m; }))
        ++row.flagged;
    tab.rows.push_back(row);
    tab.ensembles.push_back(std::move(ens));
  }
  for (std::size_t k = 0; k + 1 < tab.rows.size(); ++k) {
    auto& r = tab.rows[k];
    const auto& s = tab.rows[k + 1];
    if (r.error_u > 0.0 && s.error_u > 0.0 && s.eps < r.eps)
      r.order = std::log(r.error_u / s.error_u) / std::log(r.eps / s.eps);
  }
  tab.monotone_error = true;
  tab.monotone_occupation = tab.occupation_t1 > 0.0;
  for (std::size_t k = 0; k + 1 < tab.rows.size(); ++k) {
    if (!(tab.rows[k + 1].error_u < tab.rows[k].error_u)) tab.monotone_error = false;
    if (!(tab.rows[k + 1].occupation_k2 < tab.rows[k].occupation_k2)) tab.monotone_occupation = false;
  }
  return tab;
}

// ---------------------------------------------------------------------------
// Metastability

struct MetastabilityConfig {
  RateModel model;
  double m = 3.0;
  std::vector<double> eps_list;
  std::size_t n_traj = 10;
  double deviation_threshold = 0.5;  ///< switch when u < (1 - threshold) m
  double band = 0.1;                 ///< "close to m" means |u - m| <= band m
  double horizon = 200.0;            ///< censoring time
  double path_dt = 0.0;              ///< > 0: record u every path_dt until the switch
  std::uint64_t master_seed = 1;
  unsigned workers = 1;
  std::uint64_t event_budget = 2'000'000'000ULL;
};

struct SwitchSample {
  double switch_time = std::numeric_limits<double>::infinity();
  double t0 = std::numeric_limits<double>::infinity();  ///< first cluster of size floor(1 / eps)
  double time_in_band = 0.0;  ///< time before the switch with |u - m| <= band m
  double min_u = 0.0;
  bool censored = false;
  std::uint64_t events = 0;
  std::vector<double> path_t, path_u;

  double band_fraction() const {
    const double w = std::isfinite(switch_time) ? switch_time : 0.0;
    return w > 0.0 ? time_in_band / w : 1.0;
  }
};

struct MetastabilityRow {
  double eps = 0.0;
  std::size_t n_traj = 0;
  std::size_t n_censored = 0;
  MeanSe switch_time;   ///< over uncensored trajectories
  double switch_lower = 0.0;  ///< mean with censored runs counted at the horizon
  MeanSe log_switch;    ///< mean of log switch time
  MeanSe t0;
  double min_band_fraction = 1.0;
  std::vector<SwitchSample> samples;
};

struct MetastabilityTable {
  std::vector<MetastabilityRow> rows;
  bool increasing = false;  ///< mean switch time strictly increases as eps decreases
  bool band_ok = false;     ///< every uncensored trajectory spends >= 90% of its pre-switch window in the band
  /// Per consecutive pair: (log mean switch time difference) / (1 / eps difference).
  std::vector<double> log_growth;
};

inline SwitchSample switch_sample(const MetastabilityConfig& cfg, double eps, std::uint64_t stream) {
  const EpsilonFamily fam(cfg.model, eps);
  const Count M = initial_mass(cfg.m, eps);
  const Count big = first_passage_size(eps);
  const double eps2 = eps * eps;
  const double lower = (1.0 - cfg.deviation_threshold) * cfg.m;
  SwitchSample out;
  out.min_u = cfg.m;
  double last_t = 0.0, last_u = eps2 * static_cast<double>(M);
  auto in_band = [&](double u) { return std::abs(u - cfg.m) <= cfg.band * cfg.m; };
  TrajectoryOptions opts;
  opts.event_budget = cfg.event_budget;
  if (cfg.path_dt > 0.0) {
    const auto n = static_cast<std::size_t>(std::floor(cfg.horizon / cfg.path_dt + 1e-9));
    opts.output_times.resize(n + 1);
    for (std::size_t k = 0; k <= n; ++k) opts.output_times[k] = cfg.path_dt * static_cast<double>(k);
  }
  opts.on_event = [&](const ChainState& s, const Event&) {
    if (in_band(last_u)) out.time_in_band += s.time - last_t;
    last_t = s.time;
    last_u = eps2 * static_cast<double>(s.monomers());
    out.min_u = std::min(out.min_u, last_u);
    if (!std::isfinite(out.t0) && big >= 2 && s.count(big) >= 1) out.t0 = s.time;
  };
  StopRule stop;
  stop.kind = StopRule::Kind::Custom;
  stop.horizon = cfg.horizon;
  stop.predicate = [&](const ChainState& s) { return eps2 * static_cast<double>(s.monomers()) < lower; };
  auto rec = run_trajectory(ChainState::pure_monomer(M), RescaledMode{fam}, stop, opts, RandomStream(cfg.master_seed, stream));
  out.events = rec.events;
  for (const auto& row : rec.series) {
    out.path_t.push_back(row.t);
    out.path_u.push_back(row.u);
  }
  if (rec.reason == StopReason::RuleFired) {
    out.switch_time = rec.stop_time;
  } else {
    out.censored = true;
    if (in_band(last_u)) out.time_in_band += cfg.horizon - last_t;
  }
  return out;
}

inline MetastabilityTable metastability_probe(const MetastabilityConfig& cfg) {
  require(!cfg.eps_list.empty() && cfg.n_traj >= 1, ErrorKind::InvalidArgument, "need eps values and trajectories");
  require(cfg.deviation_threshold > 0.0 && cfg.deviation_threshold <= 1.0, ErrorKind::InvalidArgument,
          "deviation threshold must be in (0, 1]");
  MetastabilityTable tab;
  tab.band_ok = true;
  for (std::size_t e = 0; e < cfg.eps_list.size(); ++e) {
    const double eps = cfg.eps_list[e];
    MetastabilityRow row;
    row.eps = eps;
    row.n_traj = cfg.n_traj;
    row.samples = run_indexed(cfg.n_traj, cfg.workers, [&](std::size_t i) {
      return switch_sample(cfg, eps, (static_cast<std::uint64_t>(e) << 32) + i);
    });
    std::vector<double> ts, logs, t0s;
    for (const auto& s : row.samples) {
      if (s.censored) {
        ++row.n_censored;
        continue;
      }
      ts.push_back(s.switch_time);
      logs.push_back(std::log(s.switch_time));
      if (std::isfinite(s.t0)) t0s.push_back(s.t0);
      row.min_band_fraction = std::min(row.min_band_fraction, s.band_fraction());
    }
    row.switch_time = mean_se(ts);
    row.switch_lower = (row.switch_time.mean * static_cast<double>(ts.size()) +
                        cfg.horizon * static_cast<double>(row.n_censored)) /
                       static_cast<double>(cfg.n_traj);
    row.log_switch = mean_se(logs);
    row.t0 = mean_se(t0s);
    if (row.min_band_fraction < 0.9) tab.band_ok = false;
    tab.rows.push_back(std::move(row));
  }
  tab.increasing = tab.rows.size() >= 2;
  for (std::size_t k = 0; k + 1 < tab.rows.size(); ++k) {
    const auto& a = tab.rows[k];
    const auto& b = tab.rows[k + 1];
    // Censoring at the larger eps leaves its mean unknown; at the smaller eps
    // the horizon-filled mean is a lower bound.
    const bool ok = a.n_censored == 0 && b.eps < a.eps && b.switch_lower > a.switch_time.mean;
    if (!ok) tab.increasing = false;
    if (a.switch_time.n > 0 && b.switch_time.n > 0)
      tab.log_growth.push_back((std::log(b.switch_time.mean) - std::log(a.switch_time.mean)) / (1.0 / b.eps - 1.0 / a.eps));
  }
  return tab;
}

}  // namespace sbd
