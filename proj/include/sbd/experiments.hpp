#pragma once

// Experiment orchestration: dry-run validation, the fig1/fig2/fig3,
// convergence, stationary and custom protocols, and artifact writing.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sbd/analysis.hpp"
#include "sbd/config.hpp"
#include "sbd/csv.hpp"
#include "sbd/ls_pde.hpp"
#include "sbd/ssa.hpp"
#include "sbd/stationary.hpp"

#ifndef SBD_VERSION
#define SBD_VERSION "0.1.0"
#endif

namespace sbd {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Validation

struct ValidationReport {
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
  json info = json::object();

  bool ok() const { return errors.empty(); }

  json to_json() const {
    json j = info;
    j["ok"] = ok();
    j["errors"] = errors;
    j["warnings"] = warnings;
    return j;
  }
};

inline constexpr double kEventWarning = 1e7;

inline bool is_rescaled_kind(const std::string& kind) {
  return kind == "fig1" || kind == "fig3" || kind == "convergence" || kind == "custom";
}

/// Predicted events of one trajectory: M T r with r = alpha m + a(1) m + b(1)
/// for the rescaled chain; the frozen bath runs at (alpha c^2 + a(1) c + b(1)) / eps^2
/// per unit time; the unscaled first-passage chain is charged M (10 / eps) r
/// with r the unscaled per-particle rate at unit rescaled size.
inline double predicted_events(const ExperimentConfig& cfg, const RateModel& model, double eps) {
  const double a1 = model.a(1.0), b1 = model.b(1.0);
  if (cfg.experiment == "stationary")
    return (cfg.burn_in + cfg.window) * (model.alpha * cfg.c * cfg.c + a1 * cfg.c + b1) / (eps * eps);
  const double M = std::round(cfg.m / (eps * eps));
  if (cfg.experiment == "fig2") {
    const auto raw = make_raw_coefficients(cfg, eps);
    const auto i1 = static_cast<Count>(std::max(2.0, std::floor(1.0 / eps)));
    const double r = raw.a1 * M + raw.a(i1) * M + raw.b(i1);
    return M * (10.0 / eps) * r;
  }
  const double T = cfg.experiment == "fig3" ? cfg.horizon : cfg.T;
  return M * T * (model.alpha * cfg.m + a1 * cfg.m + b1);
}

inline ValidationReport validate_config(const ExperimentConfig& cfg) {
  ValidationReport rep;
  rep.info["experiment"] = cfg.experiment;
  rep.info["config_hash"] = config_hash(cfg.source);
  RateModel model;
  try {
    model = make_model(cfg);
  } catch (const Error& e) {
    rep.errors.push_back(e.what());
    return rep;
  }
  if (cfg.experiment != "fig2") {
    try {
      const Regime reg = classify_regime(model);
      rep.info["regime"] = std::string(to_string(reg.kind));
      rep.info["rho"] = reg.rho.is_infinite() ? json("inf") : json(reg.rho.value());
      if (is_rescaled_kind(cfg.experiment)) {
        const int side = reg.rho.compare(cfg.m);
        rep.info["boundary_at_start"] = side > 0 ? "incoming" : (side < 0 ? "outgoing" : "tie");
      }
      if (cfg.experiment == "stationary") {
        rep.info["stationary_case"] = stationary_case(reg, cfg.c);
        if (reg.kind == RegimeKind::Balanced) {
          const auto rc = radius_check(model, 1000);
          rep.info["radius_deviation"] = rc.deviation;
        }
      }
    } catch (const Error& e) {
      rep.errors.push_back(e.what());
    }
  }
  if (cfg.experiment == "fig1" || cfg.experiment == "convergence" || cfg.experiment == "custom") {
    try {
      const double x_max = cfg.grid.x_max > 0.0 ? cfg.grid.x_max : default_x_max(model, cfg.m, cfg.T);
      const LSGrid grid(x_max, cfg.grid.J);
      const LSOperator op(model, grid, classify_regime(model));
      const double dt = cfg.grid.cfl * std::min(op.stable_dt(0.0), op.stable_dt(cfg.m));
      rep.info["pde"] = {{"x_max", x_max}, {"dx", grid.dx}, {"dt", dt}, {"steps", std::ceil(cfg.T / dt)}};
      if (!(dt > 0.0) || !std::isfinite(cfg.T / dt)) rep.errors.push_back("grid: no stable time step");
    } catch (const Error& e) {
      rep.errors.push_back(e.what());
    }
  }
  std::vector<double> eps_list = cfg.eps;
  if (cfg.snapshot_eps && (cfg.experiment == "fig1" || cfg.experiment == "custom")) eps_list.push_back(*cfg.snapshot_eps);
  json budget = json::array();
  double worst = 0.0;
  for (double eps : eps_list) {
    double ev = 0.0;
    try {
      ev = predicted_events(cfg, model, eps);
    } catch (const Error& e) {
      rep.errors.push_back(e.what());
      continue;
    }
    worst = std::max(worst, ev);
    budget.push_back({{"eps", eps}, {"events_per_trajectory", ev}});
    if (ev > cfg.budget)
      rep.errors.push_back("budget: eps = " + format_double(eps) + " predicts " + format_double(ev) +
                           " events per trajectory, above the ceiling " + format_double(cfg.budget));
    else if (ev > kEventWarning)
      rep.warnings.push_back("budget: eps = " + format_double(eps) + " predicts about " + format_double(ev) +
                             " events per trajectory");
  }
  rep.info["budget"] = {{"ceiling", cfg.budget}, {"per_eps", budget}, {"worst", worst}};
  return rep;
}

// ---------------------------------------------------------------------------
// Artifacts

/// Files are written to a staging directory and moved into place only when
/// the whole run succeeds.
class ArtifactDir {
 public:
  explicit ArtifactDir(fs::path target) : target_(std::move(target)) {
    if (fs::exists(target_) && !fs::is_directory(target_))
      fail(ErrorKind::IOError, target_.string() + " exists and is not a directory");
    if (fs::exists(target_) && !fs::is_empty(target_) && !fs::exists(target_ / "manifest.json"))
      fail(ErrorKind::IOError, target_.string() + " is not empty and holds no previous run; refusing to overwrite");
    const fs::path parent = target_.has_parent_path() ? target_.parent_path() : fs::path(".");
    fs::create_directories(parent);
    for (int k = 0;; ++k) {
      staging_ = parent / (target_.filename().string() + ".partial" + std::to_string(k));
      if (!fs::exists(staging_)) break;
    }
    fs::create_directories(staging_);
  }

  ArtifactDir(const ArtifactDir&) = delete;
  ArtifactDir& operator=(const ArtifactDir&) = delete;

  ~ArtifactDir() {
    if (!committed_) {
      std::error_code ec;
      fs::remove_all(staging_, ec);
    }
  }

  void csv(const std::string& name, const CsvTable& table) {
    table.write(staging_ / name);
    files_.push_back(name);
  }

  void text(const std::string& name, const std::string& content, bool listed = true) {
    std::ofstream os(staging_ / name, std::ios::binary);
    if (!os) fail(ErrorKind::IOError, "cannot write " + name);
    os << content;
    if (listed) files_.push_back(name);
  }

  void json_file(const std::string& name, const json& j, bool listed = true) { text(name, j.dump(2) + "\n", listed); }

  const std::vector<std::string>& files() const { return files_; }
  const fs::path& staging() const { return staging_; }

  void commit() {
    if (fs::exists(target_)) fs::remove_all(target_);
    fs::rename(staging_, target_);
    committed_ = true;
  }

 private:
  fs::path target_;
  fs::path staging_;
  std::vector<std::string> files_;
  bool committed_ = false;
};

inline std::string eps_tag(double eps) { return format_double(eps); }

// ---------------------------------------------------------------------------
// Protocols

namespace detail {

inline json ensemble_series(ArtifactDir& out, const ConvergenceTable& tab, const std::string& prefix = "") {
  CsvTable series({"eps", "t", "u_mean", "u_se", "number_mean", "number_se", "mass_mean", "mass_se"});
  for (const auto& ens : tab.ensembles)
    for (std::size_t k = 0; k < ens.times.size(); ++k)
      series.add(ens.eps, ens.times[k], ens.u[k].mean, ens.u[k].se, ens.number[k].mean, ens.number[k].se, ens.mass[k].mean,
                 ens.mass[k].se);
  out.csv(prefix + "series.csv", series);

  CsvTable ref({"t", "u_ref", "number_ref", "u_pde", "number_pde", "mass_pde", "influx_pde"});
  for (std::size_t k = 0; k < tab.times.size(); ++k) {
    const auto& p = tab.pde.series[k];
    ref.add(tab.times[k], tab.u_ref[k], tab.number_ref[k], p.u, p.number, p.mass, p.influx);
  }
  out.csv(prefix + "reference.csv", ref);

  CsvTable profile({"x", "f"});
  const auto& snap = tab.pde.snapshots.at(0);
  for (std::size_t j = 0; j < snap.f.size(); ++j) profile.add(snap.grid.center(j), snap.f[j]);
  out.csv(prefix + "profile_T.csv", profile);

  CsvTable conv({"eps", "n_traj", "error_u", "error_u_se", "order", "flat_distance", "mass_gap", "number_gap",
                 "occupation_k2", "occupation_k2_se", "flagged", "events"});
  for (const auto& r : tab.rows)
    conv.add(r.eps, r.n_traj, r.error_u, r.error_u_se, r.order ? format_double(*r.order) : std::string(""), r.flat,
             r.mass_gap, r.number_gap, r.occupation_k2, r.occupation_k2_se, r.flagged, r.events);
  out.csv(prefix + "convergence.csv", conv);

  json s;
  s["reference"] = tab.reference_is_ode ? "moment_ode" : "ls_pde";
  s["occupation_window"] = {0.0, tab.occupation_t1};
  s["monotone_error"] = tab.monotone_error;
  s["monotone_occupation"] = tab.monotone_occupation;
  s["pde_steps"] = tab.pde.steps;
  s["pde_max_conservation_drift"] = tab.pde.max_conservation_drift;
  bool identity = true;
  for (const auto& r : tab.rows) identity = identity && r.mass_identity;
  s["mass_identity"] = identity;
  return s;
}

inline ConvergenceConfig convergence_config(const ExperimentConfig& cfg) {
  ConvergenceConfig cc;
  cc.model = make_model(cfg);
  cc.m = cfg.m;
  cc.t_end = cfg.T;
  cc.eps_list = cfg.eps;
  cc.n_traj = cfg.ensemble.n_traj;
  cc.n_outputs = cfg.ensemble.n_outputs;
  cc.master_seed = cfg.ensemble.seed;
  cc.workers = cfg.ensemble.workers;
  cc.pde_cells = cfg.grid.J;
  cc.pde_x_max = cfg.grid.x_max;
  cc.cfl = cfg.grid.cfl;
  cc.event_budget = static_cast<std::uint64_t>(std::min(cfg.budget, 9e18));
  return cc;
}

inline json run_convergence_kind(const ExperimentConfig& cfg, ArtifactDir& out) {
  const auto cc = convergence_config(cfg);
  const auto tab = convergence_study(cc);
  json s = ensemble_series(out, tab);
  if (cfg.snapshot_eps) {
    // One trajectory at a small eps, compared with the PDE profile at T.
    const double eps = *cfg.snapshot_eps;
    TrajectoryOptions opts;
    opts.output_times = uniform_times(cfg.T, cfg.ensemble.n_outputs);
    opts.snapshot_times = {cfg.T};
    opts.event_budget = cc.event_budget;
    const EpsilonFamily fam(cc.model, eps);
    auto rec = run_trajectory(ChainState::pure_monomer(initial_mass(cfg.m, eps)), RescaledMode{fam},
                              StopRule::end_time(cfg.T), opts, RandomStream(cfg.ensemble.seed, 0xFFFFFFFFULL << 32));
    CsvTable atoms({"x", "weight"});
    for (const auto& a : rec.snapshots.at(0).atoms) atoms.add(a.x, a.weight);
    out.csv("snapshot.csv", atoms);
    CsvTable path({"t", "u", "number", "mass"});
    for (const auto& r : rec.series) path.add(r.t, r.u, r.number, r.mass);
    out.csv("snapshot_series.csv", path);
    const auto d = flat_distance(rec.snapshots.at(0), tab.pde.snapshots.at(0));
    s["snapshot"] = {{"eps", eps}, {"events", rec.events}, {"flat_distance", d.flat_metric}, {"mass_gap", d.mass_gap}};
  }
  return s;
}

inline json run_fig2(const ExperimentConfig& cfg, ArtifactDir& out) {
  FirstPassageConfig fp;
  fp.coefficients = [cfg](double eps) { return make_raw_coefficients(cfg, eps); };
  const double m = cfg.m;
  fp.total_mass = [m](double eps) { return initial_mass(m, eps); };
  fp.rho_tilde = cfg.rho_tilde;
  fp.horizon = cfg.horizon;
  fp.master_seed = cfg.ensemble.seed;
  fp.workers = cfg.ensemble.workers;
  fp.event_budget = static_cast<std::uint64_t>(std::min(cfg.budget, 9e18));
  const auto rows = first_passage_times(fp, cfg.eps, cfg.ensemble.n_traj);
  CsvTable t({"eps", "M", "n_traj", "eps_T0_mean", "eps_T0_se", "eps_Trho_mean", "eps_Trho_se", "n_censored"});
  json changes = json::array();
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& r = rows[k];
    t.add(r.eps, initial_mass(m, r.eps), r.n_traj, r.mean_scaled_t0, r.se_t0, r.mean_scaled_trho, r.se_trho, r.n_censored);
    if (k > 0) changes.push_back(std::abs(r.mean_scaled_t0 / rows[k - 1].mean_scaled_t0 - 1.0));
  }
  out.csv("first_passage.csv", t);
  return {{"relative_change_eps_T0", changes}};
}

inline json run_fig3(const ExperimentConfig& cfg, ArtifactDir& out) {
  MetastabilityConfig mc;
  mc.model = make_model(cfg);
  mc.m = cfg.m;
  mc.eps_list = cfg.eps;
  mc.n_traj = cfg.ensemble.n_traj;
  mc.deviation_threshold = cfg.threshold;
  mc.band = cfg.band;
  mc.horizon = cfg.horizon;
  mc.path_dt = cfg.path_dt;
  mc.master_seed = cfg.ensemble.seed;
  mc.workers = cfg.ensemble.workers;
  mc.event_budget = static_cast<std::uint64_t>(std::min(cfg.budget, 9e18));
  const auto tab = metastability_probe(mc);
  CsvTable samples({"eps", "trajectory", "switch_time", "T0", "band_fraction", "min_u", "censored", "events"});
  CsvTable summary({"eps", "n_traj", "n_censored", "switch_mean", "switch_se", "switch_lower", "log_switch_mean",
                    "T0_mean", "T0_se", "min_band_fraction"});
  CsvTable paths({"eps", "trajectory", "t", "u"});
  for (const auto& r : tab.rows) {
    for (std::size_t i = 0; i < r.samples.size(); ++i) {
      const auto& s = r.samples[i];
      samples.add(r.eps, i, s.censored ? std::string("") : format_double(s.switch_time),
                  std::isfinite(s.t0) ? format_double(s.t0) : std::string(""), s.band_fraction(), s.min_u, s.censored,
                  s.events);
      for (std::size_t k = 0; k < s.path_t.size(); ++k) paths.add(r.eps, i, s.path_t[k], s.path_u[k]);
    }
    summary.add(r.eps, r.n_traj, r.n_censored, r.switch_time.mean, r.switch_time.se, r.switch_lower, r.log_switch.mean,
                r.t0.mean, r.t0.se, r.min_band_fraction);
  }
  out.csv("switch_times.csv", samples);
  out.csv("metastability.csv", summary);
  if (cfg.path_dt > 0.0) out.csv("paths.csv", paths);
  return {{"increasing", tab.increasing}, {"band_ok", tab.band_ok}, {"log_growth", tab.log_growth}};
}

inline json run_stationary(const ExperimentConfig& cfg, ArtifactDir& out) {
  const RateModel model = make_model(cfg);
  const Regime reg = classify_regime(model);
  const int case_id = stationary_case(reg, cfg.c);
  auto runs = run_indexed(cfg.eps.size(), cfg.ensemble.workers, [&](std::size_t k) {
    return run_frozen_bath(EpsilonFamily(model, cfg.eps[k]), cfg.c, cfg.burn_in, cfg.window, cfg.n_max, cfg.batches,
                           RandomStream(cfg.ensemble.seed, k), static_cast<std::uint64_t>(std::min(cfg.budget, 9e18)));
  });
  const auto rep = verify_stationary_measure_support(runs, model, cfg.c, cfg.n_max, cfg.burn_in_tolerance);
  CsvTable support({"eps", "n", "scaled_mean", "scaled_se", "ratio", "ratio_se", "target"});
  for (const auto& r : rep.rows) support.add(r.eps, r.n, r.scaled_mean, r.scaled_se, r.ratio, r.ratio_se, r.target);
  out.csv("support.csv", support);
  json s{{"case", case_id}, {"decreasing", rep.decreasing}, {"max_z", rep.max_z}};
  if (case_id == 3 || case_id == 4 || reg.kind == RegimeKind::Balanced) {
    const auto prof = stationary_states(model, cfg.c, 1.0, cfg.n_max);
    CsvTable p({"n", "Q", "q"});
    for (std::size_t n = 0; n <= cfg.n_max; ++n) p.add(n, prof.Q[n], prof.q[n]);
    out.csv("stationary_profile.csv", p);
    s["norm"] = prof.norm;
    s["tail_bound"] = prof.tail_bound;
  }
  if (!rep.decrease_factor.empty()) s["decrease_factor"] = rep.decrease_factor;
  if (reg.kind == RegimeKind::Balanced) {
    const auto rc = radius_check(model, 1000);
    s["radius"] = {{"estimate", rc.estimate}, {"target", rc.target}, {"deviation", rc.deviation}, {"bound", rc.bound}};
  }
  return s;
}

inline std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

}  // namespace detail

struct RunOutcome {
  fs::path directory;
  json summary;
  std::vector<std::string> files;
};

/// Runs the experiment and writes its artifacts to `target`. Nothing is left
/// behind when any step fails.
inline RunOutcome run_experiment(const ExperimentConfig& cfg, const fs::path& target) {
  const auto report = validate_config(cfg);
  if (!report.ok()) {
    std::string msg = "validation failed";
    for (const auto& e : report.errors) msg += "\n  " + e;
    fail(ErrorKind::ConfigError, msg);
  }
  const auto started = std::chrono::steady_clock::now();
  ArtifactDir out(target);
  json summary;
  if (cfg.experiment == "fig2")
    summary = detail::run_fig2(cfg, out);
  else if (cfg.experiment == "fig3")
    summary = detail::run_fig3(cfg, out);
  else if (cfg.experiment == "stationary")
    summary = detail::run_stationary(cfg, out);
  else
    summary = detail::run_convergence_kind(cfg, out);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  summary["experiment"] = cfg.experiment;
  summary["config_hash"] = config_hash(cfg.source);
  summary["seed"] = cfg.ensemble.seed;
  out.json_file("summary.json", summary);
  out.json_file("config.json", cfg.source);
  json manifest;
  manifest["experiment"] = cfg.experiment;
  manifest["config_hash"] = config_hash(cfg.source);
  manifest["seed"] = cfg.ensemble.seed;
  manifest["versions"] = {{"sbd", SBD_VERSION}, {"compiler", __VERSION__}, {"json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                                                                    std::to_string(NLOHMANN_JSON_VERSION_MINOR)}};
  manifest["artifacts"] = out.files();
  manifest["timing_file"] = "timing.json";
  out.json_file("manifest.json", manifest, false);
  out.json_file("timing.json", {{"started_utc", detail::utc_timestamp()}, {"wall_seconds", wall}}, false);
  RunOutcome res{target, summary, out.files()};
  out.commit();
  return res;
}

/// Applies command-line overrides to the raw document before parsing.
inline json apply_overrides(json doc, std::optional<std::uint64_t> seed, std::optional<unsigned> workers,
                            std::optional<double> budget) {
  if (!doc.is_object()) return doc;
  if (seed) doc["ensemble"]["seed"] = *seed;
  if (workers) doc["ensemble"]["workers"] = *workers;
  if (budget) doc["budget"] = *budget;
  return doc;
}

}  // namespace sbd
