#pragma once

// Closed moment system for size-independent rates a0, b0:
//   N' = alpha u^2,  P' = (a0 u - b0) N,  u = m - P.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "sbd/error.hpp"
#include "sbd/kinetics.hpp"

namespace sbd {

struct MomentParams {
  double a0 = 1.0;
  double b0 = 0.0;
  double alpha = 0.0;
  double m = 0.0;

  double rho() const { return b0 / a0; }
};

inline MomentParams moment_params(const RateModel& model, double m) {
  require(model.size_independent(), ErrorKind::InvalidArgument,
          "the moment system is closed only for size-independent rates");
  return {model.a(0.0), model.b(0.0), model.alpha, m};
}

struct MomentState {
  double t = 0.0;
  double N = 0.0;
  double P = 0.0;
  double u = 0.0;
};

struct MomentDerivative {
  double dN = 0.0;
  double dP = 0.0;
};

namespace detail {
inline MomentDerivative moment_field(const MomentParams& p, double N, double P) {
  const double u = p.m - P;
  return {p.alpha * u * u, (p.a0 * u - p.b0) * N};
}

inline MomentState rk4_step(const MomentParams& p, const MomentState& s, double h) {
  auto k1 = moment_field(p, s.N, s.P);
  auto k2 = moment_field(p, s.N + 0.5 * h * k1.dN, s.P + 0.5 * h * k1.dP);
  auto k3 = moment_field(p, s.N + 0.5 * h * k2.dN, s.P + 0.5 * h * k2.dP);
  auto k4 = moment_field(p, s.N + h * k3.dN, s.P + h * k3.dP);
  MomentState out;
  out.t = s.t + h;
  out.N = s.N + h / 6.0 * (k1.dN + 2.0 * k2.dN + 2.0 * k3.dN + k4.dN);
  out.P = s.P + h / 6.0 * (k1.dP + 2.0 * k2.dP + 2.0 * k3.dP + k4.dP);
  out.u = p.m - out.P;
  return out;
}
}  // namespace detail

/// Right-hand side; RegimeExit once u <= rho.
inline MomentDerivative moment_rhs(const MomentState& s, const MomentParams& p) {
  if (s.u <= p.rho()) fail(ErrorKind::RegimeExit, "u <= rho: the boundary is no longer incoming");
  return detail::moment_field(p, s.N, p.m - s.u);
}

struct MomentSeries {
  std::vector<MomentState> rows;
  std::optional<double> crossing_time;  ///< first time u reaches rho
  bool regime_exit = false;             ///< rows stop at the crossing
  double substep = 0.0;                 ///< converged internal step
  int refinements = 0;

  /// Linear interpolation in t (rows are sorted).
  MomentState at(double t) const {
    require(!rows.empty() && t >= rows.front().t - 1e-12 && t <= rows.back().t + 1e-12, ErrorKind::IndexOutOfRange,
            "time outside the integrated window");
    auto hi = std::lower_bound(rows.begin(), rows.end(), t, [](const MomentState& r, double v) { return r.t < v; });
    if (hi == rows.begin()) return rows.front();
    if (hi == rows.end()) return rows.back();
    auto lo = hi - 1;
    const double w = (t - lo->t) / (hi->t - lo->t);
    MomentState r;
    r.t = t;
    r.N = (1.0 - w) * lo->N + w * hi->N;
    r.P = (1.0 - w) * lo->P + w * hi->P;
    r.u = (1.0 - w) * lo->u + w * hi->u;
    return r;
  }
};

namespace detail {
/// Fixed-step RK4 through the output times with `sub` steps per output
/// interval; stops at the first crossing of rho, located by bisection.
inline MomentSeries integrate_fixed(const MomentState& init, const MomentParams& p, std::span<const double> times,
                                    int sub) {
  MomentSeries out;
  MomentState s = init;
  s.u = p.m - s.P;
  const double rho = p.rho();
  std::size_t k = 0;
  while (k < times.size() && times[k] <= s.t) {
    MomentState r = s;
    r.t = times[k++];
    out.rows.push_back(r);
  }
  if (s.u <= rho) {
    out.crossing_time = s.t;
    out.regime_exit = true;
    return out;
  }
  for (; k < times.size(); ++k) {
    const double h = (times[k] - s.t) / sub;
    for (int i = 0; i < sub; ++i) {
      MomentState n = rk4_step(p, s, h);
      if (n.u <= rho) {
        double lo = 0.0, hi = h;
        while (hi - lo > 1e-10) {
          const double mid = 0.5 * (lo + hi);
          (rk4_step(p, s, mid).u <= rho ? hi : lo) = mid;
        }
        out.crossing_time = s.t + hi;
        out.regime_exit = true;
        return out;
      }
      s = n;
    }
    s.t = times[k];
    out.rows.push_back(s);
  }
  return out;
}
}  // namespace detail

/// RK4 with the substep halved until successive refinements agree to 1e-8
/// (sup norm over N, P at the output times).
inline MomentSeries integrate_moments(const MomentState& init, const MomentParams& params, std::span<const double> times) {
  require(params.a0 > 0.0 && params.b0 >= 0.0 && params.alpha >= 0.0 && params.m >= 0.0, ErrorKind::InvalidArgument,
          "moment parameters out of range");
  require(std::is_sorted(times.begin(), times.end()), ErrorKind::InvalidArgument, "output times must be sorted");
  MomentSeries prev = detail::integrate_fixed(init, params, times, 1);
  for (int level = 1; level <= 24; ++level) {
    const int sub = 1 << level;
    MomentSeries cur = detail::integrate_fixed(init, params, times, sub);
    double diff = cur.rows.size() == prev.rows.size() ? 0.0 : std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cur.rows.size() && i < prev.rows.size(); ++i)
      diff = std::max({diff, std::abs(cur.rows[i].N - prev.rows[i].N), std::abs(cur.rows[i].P - prev.rows[i].P)});
    if (cur.crossing_time && prev.crossing_time)
      diff = std::max(diff, std::abs(*cur.crossing_time - *prev.crossing_time));
    cur.refinements = level;
    cur.substep = times.size() > 1 ? (times.back() - times.front()) / static_cast<double>(times.size() - 1) / sub : 0.0;
    if (diff < 1e-8) return cur;
    prev = std::move(cur);
  }
  fail(ErrorKind::StallError, "moment integration did not converge under step halving");
}

/// Uniform outputs k dt for k dt <= T (T itself always included).
inline MomentSeries integrate_moments(const MomentState& init, const MomentParams& params, double T, double dt) {
  require(dt > 0.0 && T >= init.t, ErrorKind::InvalidArgument, "need dt > 0 and T >= t0");
  std::vector<double> times;
  const auto n = static_cast<std::size_t>(std::floor((T - init.t) / dt + 1e-9));
  for (std::size_t k = 0; k <= n; ++k) times.push_back(init.t + dt * static_cast<double>(k));
  if (std::abs(times.back() - T) <= 1e-9 * std::max(1.0, T))
    times.back() = T;
  else
    times.push_back(T);
  return integrate_moments(init, params, times);
}

}  // namespace sbd
