#pragma once

// Stationary states of the boundary-layer Becker-Doring chain at frozen
// concentration c, and checks of frozen-bath simulations against them.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "sbd/chain.hpp"
#include "sbd/ensemble.hpp"
#include "sbd/error.hpp"
#include "sbd/kinetics.hpp"
#include "sbd/ssa.hpp"

namespace sbd {

/// 1: aggregation dominant, c > 0. 2: fragmentation dominant. 3: balanced,
/// c < rho. 4: balanced, c > rho. c == 0 falls in case 3 (or 2).
inline int stationary_case(const Regime& regime, double c) {
  require(c >= 0.0 && std::isfinite(c), ErrorKind::InvalidArgument, "c must be finite and nonnegative");
  switch (regime.kind) {
    case RegimeKind::AggregationDominant: return c > 0.0 ? 1 : 3;
    case RegimeKind::FragmentationDominant: return 2;
    case RegimeKind::Balanced: break;
  }
  const int side = regime.rho.compare(c);
  if (side == 0) fail(ErrorKind::UnsupportedRegime, "c == rho: no stationary state is specified at the threshold");
  return side < 0 ? 3 : 4;
}

/// log Q_n = sum_{i<n} log(a_i / b_{i+1}) for n <= n_max, in extended precision.
inline std::vector<long double> log_q_products(const DiscreteRates& rates, std::size_t n_max) {
  require(rates.a.size() >= n_max && rates.b.size() >= n_max + 1, ErrorKind::IndexOutOfRange,
          "rates too short for n_max");
  std::vector<long double> out(n_max + 1, 0.0L);
  for (std::size_t n = 1; n <= n_max; ++n)
    out[n] = out[n - 1] + std::log(static_cast<long double>(rates.a[n - 1])) - std::log(static_cast<long double>(rates.b[n]));
  return out;
}

/// Same products from the rate law parameters in extended precision, so the
/// rounding of tabulated rates does not accumulate.
inline std::vector<long double> log_q_products(const RateModel& model, std::size_t n_max) {
  const long double la = std::log(static_cast<long double>(model.a_bar()));
  const long double lb = std::log(static_cast<long double>(model.b_bar()));
  const long double ra = model.r_a(), rb = model.r_b();
  std::vector<long double> out(n_max + 1, 0.0L);
  long double sum = 0.0L, carry = 0.0L;  // compensated
  for (std::size_t n = 1; n <= n_max; ++n) {
    const long double i = static_cast<long double>(n - 1);
    const long double y = ra * std::log(i + 2.0L) - rb * std::log(i + 3.0L) - carry;
    const long double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
    out[n] = static_cast<long double>(n) * (la - lb) + sum;
  }
  return out;
}

/// Q_n = (a_bar / b_bar)^n 2^r / (n + 2)^r for equal exponents r.
inline double q_closed_form(double a_bar, double b_bar, double r, std::size_t n) {
  const long double l = static_cast<long double>(n) * std::log(static_cast<long double>(a_bar) / b_bar) +
                        static_cast<long double>(r) * (std::log(2.0L) - std::log(static_cast<long double>(n) + 2.0L));
  return static_cast<double>(std::exp(l));
}

struct StationaryProfile {
  Regime regime{RegimeKind::Balanced, Rho::finite(0.0)};
  int case_id = 0;
  double c = 0.0;
  double q0 = 0.0;
  std::vector<double> q;  ///< q_n for n <= n_max
  std::vector<double> Q;  ///< Q_n for n <= n_max
  double partial_sum = 0.0;
  double tail_bound = 0.0;
  double norm = 0.0;  ///< partial_sum + tail_bound
};

namespace detail {
inline StationaryProfile stationary_from_logq(const Regime& regime, const std::vector<long double>& logq, double c,
                                              double q0, std::size_t n_max) {
  require(q0 >= 0.0 && std::isfinite(q0), ErrorKind::InvalidArgument, "q0 must be finite and nonnegative");
  require(n_max >= 1, ErrorKind::InvalidArgument, "n_max must be >= 1");
  StationaryProfile p;
  p.regime = regime;
  p.c = c;
  p.case_id = stationary_case(regime, c);
  p.q.assign(n_max + 1, 0.0);
  p.Q.assign(n_max + 1, 0.0);
  for (std::size_t n = 0; n <= n_max; ++n) p.Q[n] = static_cast<double>(std::exp(logq[n]));
  switch (p.case_id) {
    case 1:
    case 4: p.q0 = 0.0; break;
    case 2: p.q0 = q0; p.q[0] = q0; break;
    case 3: {
      p.q0 = q0;
      p.q[0] = q0;
      if (c > 0.0 && q0 > 0.0) {
        const long double lc = std::log(static_cast<long double>(c));
        const long double lq0 = std::log(static_cast<long double>(q0));
        for (std::size_t n = 1; n <= n_max; ++n)
          p.q[n] = static_cast<double>(std::exp(logq[n] + static_cast<long double>(n) * lc + lq0));
      }
      // Successive ratios c a_n / b_{n+1} are at most c / rho beyond n_max.
      double theta = 0.0;
      if (c > 0.0) {
        if (regime.kind == RegimeKind::Balanced)
          theta = c / regime.rho.value();
        else
          fail(ErrorKind::DivergentNorm, "no tail bound for the aggregation-dominant series with c > 0");
      }
      if (theta >= 1.0) fail(ErrorKind::DivergentNorm, "stationary series ratio bound is >= 1");
      long double s = 0.0L;
      for (double v : p.q) s += v;
      p.partial_sum = static_cast<double>(s);
      p.tail_bound = p.q[n_max] * theta / (1.0 - theta);
      if (!std::isfinite(p.tail_bound)) fail(ErrorKind::DivergentNorm, "tail bound is not finite");
      break;
    }
    default: break;
  }
  if (p.case_id != 3) {
    long double s = 0.0L;
    for (double v : p.q) s += v;
    p.partial_sum = static_cast<double>(s);
  }
  p.norm = p.partial_sum + p.tail_bound;
  return p;
}
}  // namespace detail

inline StationaryProfile stationary_states(const Regime& regime, const DiscreteRates& rates, double c, double q0,
                                           std::size_t n_max) {
  return detail::stationary_from_logq(regime, log_q_products(rates, n_max), c, q0, n_max);
}

inline StationaryProfile stationary_states(const RateModel& model, double c, double q0, std::size_t n_max) {
  return detail::stationary_from_logq(classify_regime(model), log_q_products(model, n_max), c, q0, n_max);
}

struct RadiusEstimate {
  double estimate = 0.0;   ///< Q_{n_max}^{1/n_max}
  double target = 0.0;     ///< a_bar / b_bar = 1 / rho
  double deviation = 0.0;  ///< estimate / target - 1
  double bound = 0.0;      ///< (2^r / (n_max + 2)^r)^{1/n_max} - 1
};

inline RadiusEstimate radius_check(const RateModel& model, std::size_t n_max) {
  const Regime reg = classify_regime(model);
  require(reg.kind == RegimeKind::Balanced, ErrorKind::UnsupportedRegime, "radius check needs the balanced regime");
  const auto logq = log_q_products(model, n_max);
  RadiusEstimate out;
  const long double nn = static_cast<long double>(n_max);
  out.estimate = static_cast<double>(std::exp(logq[n_max] / nn));
  out.target = model.a_bar() / model.b_bar();
  out.deviation = out.estimate / out.target - 1.0;
  const long double r = model.r_a();
  out.bound = static_cast<double>(std::expm1(r * (std::log(2.0L) - std::log(nn + 2.0L)) / nn));
  return out;
}

// ---------------------------------------------------------------------------
// Frozen-bath sampling

struct FrozenBathRun {
  double eps = 0.0;
  OccupationAccumulator occupation;
  std::uint64_t events = 0;
};

/// One frozen-bath trajectory from no clusters; occupation recorded on
/// [burn_in, burn_in + window] split into `batches` batches.
inline FrozenBathRun run_frozen_bath(const EpsilonFamily& family, double c, double burn_in, double window,
                                     std::size_t n_max, std::size_t batches, RandomStream rng,
                                     std::uint64_t event_budget = 2'000'000'000ULL) {
  require(window >= 0.0 && burn_in >= 0.0, ErrorKind::InvalidArgument, "negative window");
  TrajectoryOptions opts;
  opts.occupation = OccupationSpec{burn_in, burn_in + window, n_max, batches};
  opts.event_budget = event_budget;
  auto rec = run_trajectory(ChainState::pure_monomer(0), FrozenBathMode{family, c}, StopRule::end_time(burn_in + window),
                            opts, rng);
  return {family.eps, *rec.occupation, rec.events};
}

struct SupportRow {
  double eps = 0.0;
  std::size_t n = 0;
  double scaled_mean = 0.0;  ///< time average of eps k_{n+2}
  double scaled_se = 0.0;    ///< batch-means standard error
  double ratio = 0.0;        ///< <k_{n+2}> / <k_2>
  double ratio_se = 0.0;
  double target = 0.0;       ///< Q_n c^n (case 3); 0 otherwise
};

struct SupportReport {
  int case_id = 0;
  double c = 0.0;
  std::vector<SupportRow> rows;
  /// Cases 1 and 4: per n, min over consecutive eps of value(eps_k) / value(eps_{k+1}).
  std::vector<double> decrease_factor;
  bool decreasing = false;
  /// Case 3: max over n of |ratio - target| / ratio_se.
  double max_z = 0.0;
};

namespace detail {
inline MeanSe batch_mean_se(const OccupationAccumulator& acc, std::size_t n) {
  std::vector<double> xs(acc.batches());
  for (std::size_t b = 0; b < xs.size(); ++b) xs[b] = acc.batch_average(b, n);
  return mean_se(xs);
}

inline void check_burn_in(const OccupationAccumulator& acc, double tolerance) {
  if (acc.empty() || !(acc.length() > 0.0))
    fail(ErrorKind::InsufficientBurnIn, "empty sampling window");
  const std::size_t B = acc.batches();
  require(B >= 2, ErrorKind::InvalidArgument, "burn-in check needs at least two batches");
  double first = 0.0, second = 0.0;
  for (std::size_t b = 0; b < B; ++b) (2 * b < B ? first : second) += acc.batch_average(b, 0);
  first /= static_cast<double>(B / 2 + B % 2);
  second /= static_cast<double>(B / 2);
  const double scale = 0.5 * (first + second);
  if (scale > 0.0 && std::abs(first - second) > tolerance * scale)
    fail(ErrorKind::InsufficientBurnIn, "first and second half averages differ by " +
                                            std::to_string(std::abs(first - second) / scale) + " (relative)");
}
}  // namespace detail

/// Samples are ordered by decreasing eps. Cases 1 and 4: the rescaled
/// averages eps <k_{n+2}> must decrease along the list. Case 3: the ratios
/// <k_{n+2}> / <k_2> are compared with Q_n c^n.
inline SupportReport verify_stationary_measure_support(std::span<const FrozenBathRun> samples, const RateModel& model,
                                                       double c, std::size_t n_max, double burn_in_tolerance = 0.15) {
  require(!samples.empty(), ErrorKind::InvalidArgument, "no samples");
  const Regime regime = classify_regime(model);
  SupportReport rep;
  rep.case_id = stationary_case(regime, c);
  rep.c = c;
  std::vector<double> target(n_max + 1, 0.0);
  if (rep.case_id == 3) {
    auto prof = stationary_states(model, c, 1.0, n_max);
    target = prof.q;
  }
  for (const auto& s : samples) {
    require(s.occupation.n_max() >= n_max, ErrorKind::IndexOutOfRange, "occupation recorded too few sizes");
    detail::check_burn_in(s.occupation, burn_in_tolerance);
    const auto y = detail::batch_mean_se(s.occupation, 0);
    for (std::size_t n = 0; n <= n_max; ++n) {
      const auto x = detail::batch_mean_se(s.occupation, n);
      SupportRow row{s.eps, n, x.mean, x.se, 0.0, 0.0, target[n]};
      if (y.mean > 0.0) {
        row.ratio = x.mean / y.mean;
        const std::size_t B = s.occupation.batches();
        if (B >= 2) {
          long double ss = 0.0L;
          for (std::size_t b = 0; b < B; ++b) {
            const double d = s.occupation.batch_average(b, n) - row.ratio * s.occupation.batch_average(b, 0);
            ss += static_cast<long double>(d) * d;
          }
          row.ratio_se = static_cast<double>(std::sqrt(ss / (B * (B - 1.0L)))) / y.mean;
        }
      }
      if (rep.case_id == 3 && n > 0 && row.ratio_se > 0.0)
        rep.max_z = std::max(rep.max_z, std::abs(row.ratio - row.target) / row.ratio_se);
      rep.rows.push_back(row);
    }
  }
  if (rep.case_id == 1 || rep.case_id == 4) {
    rep.decrease_factor.assign(n_max + 1, std::numeric_limits<double>::infinity());
    rep.decreasing = samples.size() >= 2;
    for (std::size_t k = 0; k + 1 < samples.size(); ++k)
      for (std::size_t n = 0; n <= n_max; ++n) {
        const double hi = rep.rows[k * (n_max + 1) + n].scaled_mean;
        const double lo = rep.rows[(k + 1) * (n_max + 1) + n].scaled_mean;
        const double f = lo > 0.0 ? hi / lo : (hi > 0.0 ? std::numeric_limits<double>::infinity() : 1.0);
        rep.decrease_factor[n] = std::min(rep.decrease_factor[n], f);
        if (!(f > 1.0)) rep.decreasing = false;
      }
  }
  return rep;
}

}  // namespace sbd
