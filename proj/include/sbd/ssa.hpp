#pragma once

// Exact event-driven simulation of the Becker-Doring chain in three modes:
// unscaled (raw per-index coefficients), rescaled (epsilon family), and
// frozen bath (free-particle concentration held at c).

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <variant>
#include <vector>

#include "sbd/chain.hpp"
#include "sbd/ensemble.hpp"
#include "sbd/error.hpp"
#include "sbd/fenwick.hpp"
#include "sbd/kinetics.hpp"
#include "sbd/rng.hpp"

namespace sbd {

struct RawMode {
  RawCoefficients coeffs;
  double report_scale = 1.0;  ///< eps used to scale recorded observables
};

struct RescaledMode {
  EpsilonFamily family;
};

struct FrozenBathMode {
  EpsilonFamily family;
  double c = 0.0;
};

using SimulationMode = std::variant<RawMode, RescaledMode, FrozenBathMode>;

/// When a trajectory stops. Every rule also carries a time horizon; reaching
/// it without the rule firing is a censored observation for the size and
/// custom rules.
struct StopRule {
  enum class Kind { EndTime, SizeReached, Custom };

  Kind kind = Kind::EndTime;
  double horizon = std::numeric_limits<double>::infinity();
  Count size = 0;
  Count count = 1;
  std::function<bool(const ChainState&)> predicate;

  static StopRule end_time(double t) { return {Kind::EndTime, t, 0, 0, {}}; }
  static StopRule size_reached(Count size, Count count, double horizon) {
    return {Kind::SizeReached, horizon, size, count, {}};
  }
  static StopRule custom(std::function<bool(const ChainState&)> pred, double horizon) {
    return {Kind::Custom, horizon, 0, 0, std::move(pred)};
  }

  bool fires(const ChainState& s) const {
    switch (kind) {
      case Kind::EndTime: return false;
      case Kind::SizeReached: return s.count(size) >= count;
      case Kind::Custom: return predicate && predicate(s);
    }
    return false;
  }
};

enum class StopReason { EndTime, RuleFired, Absorbed, Censored };

struct SeriesRow {
  double t = 0.0;
  double u = 0.0;       ///< free-particle concentration
  double number = 0.0;  ///< <mu, 1>
  double mass = 0.0;    ///< <mu, Id>
  Count monomers = 0;
  Count cluster_number = 0;
  Count cluster_mass = 0;
};

struct OccupationSpec {
  double t0 = 0.0;
  double t1 = 0.0;
  std::size_t n_max = 32;
  std::size_t batches = 1;
};

struct TrajectoryOptions {
  std::vector<double> output_times;
  std::vector<double> snapshot_times;
  std::optional<OccupationSpec> occupation;
  std::uint64_t event_budget = 2'000'000'000ULL;
  /// Recompute n1 + sum i k_i == M from scratch after every event.
  bool check_conservation = false;
  std::function<void(const ChainState&, const Event&)> on_event;
};

struct TrajectoryRecord {
  std::vector<SeriesRow> series;
  std::vector<EmpiricalMeasure> snapshots;
  std::vector<double> snapshot_times;
  std::optional<OccupationAccumulator> occupation;
  ChainState final_state;
  std::uint64_t events = 0;
  std::uint64_t conservation_checks = 0;
  StopReason reason = StopReason::EndTime;
  double stop_time = 0.0;
};

/// Holds the chain state, the per-size selection trees and the random stream
/// of one trajectory. Aggregation weights are stored without the common
/// free-particle factor so that a monomer-count change costs O(1).
class Simulator {
 public:
  Simulator(ChainState init, SimulationMode mode, RandomStream rng)
      : state_(std::move(init)), mode_(std::move(mode)), rng_(rng) {
    if (auto* fb = std::get_if<FrozenBathMode>(&mode_)) {
      require(fb->c >= 0.0, ErrorKind::InvalidArgument, "frozen-bath concentration must be nonnegative");
      reservoir_ = true;
    }
    state_.for_each_cluster([&](Count i, Count) { refresh(i); });
  }

  const ChainState& state() const { return state_; }
  const SimulationMode& mode() const { return mode_; }
  bool reservoir() const { return reservoir_; }

  /// Current rates as maintained by the selection trees.
  Propensities propensities() const {
    Propensities p;
    p.nucleation = nucleation_rate();
    p.denucleation = denucleation_rate();
    p.aggregation_total = aggregation_factor() * agg_.total();
    p.fragmentation_total = frag_.total();
    state_.for_each_cluster([&](Count i, Count) {
      p.aggregation.push_back({i, aggregation_factor() * agg_.value(static_cast<std::size_t>(i))});
      if (i >= 3) p.fragmentation.push_back({i, frag_.value(static_cast<std::size_t>(i))});
    });
    return p;
  }

  double total_rate() const {
    double t = nucleation_rate() + denucleation_rate() + aggregation_factor() * agg_.total() + frag_.total();
    if (!std::isfinite(t)) fail(ErrorKind::NonFinite, "total propensity is not finite");
    return t;
  }

  /// Observables in the mode's reporting scale.
  SeriesRow observe() const {
    SeriesRow r;
    r.t = state_.time;
    r.monomers = state_.monomers();
    r.cluster_number = state_.cluster_number();
    r.cluster_mass = state_.cluster_mass();
    const double s = scale();
    r.number = s * static_cast<double>(r.cluster_number);
    r.mass = s * s * static_cast<double>(r.cluster_mass);
    if (const auto* fb = std::get_if<FrozenBathMode>(&mode_))
      r.u = fb->c;
    else
      r.u = s * s * static_cast<double>(r.monomers);
    return r;
  }

  double scale() const {
    return std::visit(
        [](const auto& m) -> double {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, RawMode>)
            return m.report_scale;
          else
            return m.family.eps;
        },
        mode_);
  }

  /// Draws the next event given the total rate; does not advance time.
  Event select(double total) {
    double r = rng_.uniform() * total;
    const double nuc = nucleation_rate();
    const double den = denucleation_rate();
    const double factor = aggregation_factor();
    const double agg = factor * agg_.total();
    const double frag = frag_.total();
    if (r < nuc) return {EventKind::Nucleation, 2};
    r -= nuc;
    if (r < den) return {EventKind::Denucleation, 2};
    r -= den;
    if ((r < agg && agg > 0.0) || frag <= 0.0) {
      if (agg <= 0.0) return nuc > 0.0 ? Event{EventKind::Nucleation, 2} : Event{EventKind::Denucleation, 2};
      double target = std::min(r / factor, std::nextafter(agg_.total(), 0.0));
      return {EventKind::Aggregation, static_cast<Count>(agg_.find(std::max(target, 0.0)))};
    }
    r -= agg;
    double target = std::min(std::max(r, 0.0), std::nextafter(frag, 0.0));
    return {EventKind::Fragmentation, static_cast<Count>(frag_.find(target))};
  }

  void apply(const Event& e) {
    EventApplier::apply(state_, e, reservoir_);
    switch (e.kind) {
      case EventKind::Nucleation:
      case EventKind::Denucleation: refresh(2); break;
      case EventKind::Aggregation:
        refresh(e.size);
        refresh(e.size + 1);
        break;
      case EventKind::Fragmentation:
        refresh(e.size);
        refresh(e.size - 1);
        break;
    }
  }

  double draw_waiting_time(double total) { return rng_.exponential(total); }

  void set_time(double t) { state_.time = t; }

 private:
  double aggregation_coef(Count i) {
    return cached(agg_coef_, i, [this](Count k) {
      return std::visit(
          [k](const auto& m) -> double {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, RawMode>)
              return m.coeffs.a(k);
            else
              return m.family.a_eps(k);
          },
          mode_);
    });
  }

  double fragmentation_coef(Count i) {
    return cached(frag_coef_, i, [this](Count k) {
      return std::visit(
          [k](const auto& m) -> double {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, RawMode>)
              return m.coeffs.b(k);
            else
              return static_cast<double>(static_cast<long double>(m.family.b_eps(k)) / m.family.eps);
          },
          mode_);
    });
  }

  template <class F>
  static double cached(std::vector<double>& table, Count i, F&& compute) {
    auto idx = static_cast<std::size_t>(i);
    if (idx >= table.size()) table.resize(std::max(idx + 1, 2 * table.size()), std::numeric_limits<double>::quiet_NaN());
    if (std::isnan(table[idx])) {
      double v = compute(i);
      if (!std::isfinite(v) || v < 0.0) fail(ErrorKind::NonFinite, "rate coefficient is negative or not finite");
      table[idx] = v;
    }
    return table[idx];
  }

  void refresh(Count i) {
    const Count k = state_.count(i);
    const auto idx = static_cast<std::size_t>(i);
    agg_.set(idx, k == 0 ? 0.0 : aggregation_coef(i) * static_cast<double>(k));
    if (i >= 3) frag_.set(idx, k == 0 ? 0.0 : fragmentation_coef(i) * static_cast<double>(k));
  }

  double nucleation_rate() const {
    return std::visit(
        [this](const auto& m) -> double {
          using M = std::decay_t<decltype(m)>;
          const long double n1 = static_cast<long double>(state_.monomers());
          if constexpr (std::is_same_v<M, RawMode>) {
            return static_cast<double>(m.coeffs.a1 * n1 * (n1 - 1.0L));
          } else if constexpr (std::is_same_v<M, RescaledMode>) {
            const long double e = m.family.eps;
            return static_cast<double>(m.family.alpha_eps * e * e * e * n1 * (n1 - 1.0L));
          } else {
            const long double e = m.family.eps;
            const long double c = m.c;
            return static_cast<double>(std::max(0.0L, m.family.alpha_eps * c * (c - e * e) / e));
          }
        },
        mode_);
  }

  double denucleation_rate() const {
    const double k2 = static_cast<double>(state_.count(2));
    return std::visit(
        [k2](const auto& m) -> double {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, RawMode>)
            return m.coeffs.b2 * k2;
          else
            return m.family.beta_eps * k2;
        },
        mode_);
  }

  double aggregation_factor() const {
    return std::visit(
        [this](const auto& m) -> double {
          using M = std::decay_t<decltype(m)>;
          const double n1 = static_cast<double>(state_.monomers());
          if constexpr (std::is_same_v<M, RawMode>)
            return n1;
          else if constexpr (std::is_same_v<M, RescaledMode>)
            return m.family.eps * n1;
          else
            return m.c / m.family.eps;
        },
        mode_);
  }

  ChainState state_;
  SimulationMode mode_;
  RandomStream rng_;
  bool reservoir_ = false;
  FenwickTree agg_;
  FenwickTree frag_;
  std::vector<double> agg_coef_;
  std::vector<double> frag_coef_;
};

/// Exact SSA loop: exponential waiting time with the total rate, category
/// then size chosen proportionally to their rates. Outputs are sampled from
/// the piecewise-constant path (the state in force just before an event at
/// the same instant is not reported; events are right-continuous).
inline TrajectoryRecord run_trajectory(ChainState init, const SimulationMode& mode, const StopRule& stop,
                                       const TrajectoryOptions& opts, RandomStream rng) {
  Simulator sim(std::move(init), mode, rng);
  TrajectoryRecord rec;
  if (opts.occupation)
    rec.occupation.emplace(sim.scale(), opts.occupation->t0, opts.occupation->t1, opts.occupation->n_max,
                           opts.occupation->batches);

  std::size_t next_out = 0;
  std::size_t next_snap = 0;
  const auto& outs = opts.output_times;
  const auto& snaps = opts.snapshot_times;
  // Emits every output/snapshot time in [.., t_before) (or <= t_before when inclusive).
  auto record_until = [&](double t_limit, bool inclusive) {
    auto due = [&](double tau) { return inclusive ? tau <= t_limit : tau < t_limit; };
    while (next_out < outs.size() && due(outs[next_out])) {
      SeriesRow r = sim.observe();
      r.t = outs[next_out++];
      rec.series.push_back(r);
    }
    while (next_snap < snaps.size() && due(snaps[next_snap])) {
      rec.snapshots.push_back(snapshot_measure(sim.state(), sim.scale()));
      if (sim.reservoir()) rec.snapshots.back().u = sim.observe().u;
      rec.snapshot_times.push_back(snaps[next_snap++]);
    }
  };
  auto occupy = [&](double from, double to) {
    if (rec.occupation && to > from) rec.occupation->accumulate(sim.state(), from, to);
  };

  const double horizon = stop.horizon;
  double t = sim.state().time;
  if (stop.fires(sim.state())) {
    rec.reason = StopReason::RuleFired;
    record_until(t, true);
  } else {
    for (;;) {
      const double total = sim.total_rate();
      if (total <= 0.0) {
        const double t_end = std::isfinite(horizon) ? horizon : t;
        record_until(t_end, true);
        occupy(t, t_end);
        t = t_end;
        rec.reason = StopReason::Absorbed;
        break;
      }
      const double t_next = t + sim.draw_waiting_time(total);
      if (t_next > horizon) {
        record_until(horizon, true);
        occupy(t, horizon);
        t = horizon;
        rec.reason = stop.kind == StopRule::Kind::EndTime ? StopReason::EndTime : StopReason::Censored;
        break;
      }
      record_until(t_next, false);
      occupy(t, t_next);
      const Event e = sim.select(total);
      sim.apply(e);
      t = t_next;
      sim.set_time(t);
      if (++rec.events > opts.event_budget)
        fail(ErrorKind::StallError, "event budget exhausted at t = " + std::to_string(t));
      if (opts.check_conservation) {
        ++rec.conservation_checks;
        if (!sim.reservoir() && !sim.state().mass_identity_holds())
          fail(ErrorKind::InvariantViolation, "mass identity broken after event " + std::to_string(rec.events));
      }
      if (opts.on_event) opts.on_event(sim.state(), e);
      if (stop.fires(sim.state())) {
        rec.reason = StopReason::RuleFired;
        record_until(t, true);
        break;
      }
    }
  }
  rec.stop_time = t;
  rec.final_state = sim.state();
  rec.final_state.time = t;
  return rec;
}

/// Uniform grid of `n` intervals on [0, T] (n + 1 points).
inline std::vector<double> uniform_times(double t_end, std::size_t n) {
  std::vector<double> ts(n + 1);
  for (std::size_t k = 0; k <= n; ++k) ts[k] = t_end * static_cast<double>(k) / static_cast<double>(n);
  ts.back() = t_end;
  return ts;
}

// ---------------------------------------------------------------------------
// First-passage times of the unscaled chain started from pure monomers

struct FirstPassageConfig {
  /// Per-index coefficients of the unscaled chain at scale eps.
  std::function<RawCoefficients(double eps)> coefficients;
  /// Initial free particles; M = round(1 / eps^2) by default.
  std::function<Count(double eps)> total_mass = [](double eps) { return static_cast<Count>(std::llround(1.0 / (eps * eps))); };
  double rho_tilde = 0.01;
  double horizon = 1e6;  ///< per-trajectory time limit; beyond it the run is censored
  std::uint64_t master_seed = 1;
  unsigned workers = 1;
  std::uint64_t event_budget = 2'000'000'000ULL;
};

struct FirstPassageSample {
  double t0 = std::numeric_limits<double>::infinity();
  double t_rho = std::numeric_limits<double>::infinity();
  bool censored = false;
};

struct FirstPassageRow {
  double eps = 0.0;
  std::size_t n_traj = 0;
  double mean_scaled_t0 = 0.0;
  double se_t0 = 0.0;
  double mean_scaled_trho = 0.0;
  double se_trho = 0.0;
  std::size_t n_censored = 0;
};

/// Size whose first occupation defines T_0, and the count target defining
/// T_rho (at least one cluster, so T_rho >= T_0).
inline Count first_passage_size(double eps) { return static_cast<Count>(std::floor(1.0 / eps + 1e-9)); }
inline Count first_passage_target(double eps, double rho_tilde) {
  return std::max<Count>(1, static_cast<Count>(std::floor(rho_tilde / eps + 1e-9)));
}

inline FirstPassageSample first_passage_sample(const FirstPassageConfig& cfg, double eps, std::uint64_t stream) {
  const Count size = first_passage_size(eps);
  const Count target = first_passage_target(eps, cfg.rho_tilde);
  require(size >= 2, ErrorKind::InvalidArgument, "floor(1/eps) must be >= 2");
  FirstPassageSample out;
  TrajectoryOptions opts;
  opts.event_budget = cfg.event_budget;
  opts.on_event = [&](const ChainState& s, const Event&) {
    if (!std::isfinite(out.t0) && s.count(size) >= 1) out.t0 = s.time;
  };
  RawMode mode{cfg.coefficients(eps), eps};
  auto rec = run_trajectory(ChainState::pure_monomer(cfg.total_mass(eps)), mode,
                            StopRule::size_reached(size, target, cfg.horizon), opts, RandomStream(cfg.master_seed, stream));
  if (rec.reason == StopReason::RuleFired) {
    out.t_rho = rec.stop_time;
    if (!std::isfinite(out.t0)) out.t0 = rec.stop_time;
  } else {
    out.censored = true;
  }
  return out;
}

inline std::vector<FirstPassageRow> first_passage_times(const FirstPassageConfig& cfg, std::span<const double> eps_list,
                                                        std::size_t n_traj) {
  require(n_traj >= 1, ErrorKind::InvalidArgument, "need at least one trajectory");
  std::vector<FirstPassageRow> rows;
  for (std::size_t e = 0; e < eps_list.size(); ++e) {
    const double eps = eps_list[e];
    auto samples = run_indexed(n_traj, cfg.workers, [&](std::size_t i) {
      return first_passage_sample(cfg, eps, (static_cast<std::uint64_t>(e) << 32) + i);
    });
    std::vector<double> t0, tr;
    FirstPassageRow row;
    row.eps = eps;
    row.n_traj = n_traj;
    for (const auto& s : samples) {
      if (s.censored) {
        ++row.n_censored;
        continue;
      }
      t0.push_back(eps * s.t0);
      tr.push_back(eps * s.t_rho);
    }
    auto m0 = mean_se(t0);
    auto mr = mean_se(tr);
    row.mean_scaled_t0 = t0.empty() ? std::numeric_limits<double>::infinity() : m0.mean;
    row.se_t0 = m0.se;
    row.mean_scaled_trho = tr.empty() ? std::numeric_limits<double>::infinity() : mr.mean;
    row.se_trho = mr.se;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace sbd
