#pragma once

// Finite-volume upwind solver for the Lifshitz-Slyozov equation
//   d_t f + d_x [(a(x) u - b(x)) f] = 0,  u + <f, x> = m,
// with the nucleation flux alpha u^2 at x = 0 while characteristics enter.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sbd/error.hpp"
#include "sbd/kinetics.hpp"

namespace sbd {

struct LSGrid {
  double x_max = 0.0;
  std::size_t J = 0;
  double dx = 0.0;

  LSGrid() = default;
  LSGrid(double x_max_value, std::size_t cells) : x_max(x_max_value), J(cells), dx(x_max_value / static_cast<double>(cells)) {
    require(cells >= 1 && x_max > 0.0 && std::isfinite(x_max), ErrorKind::InvalidArgument,
            "grid needs x_max > 0 and at least one cell");
  }

  double center(std::size_t j) const { return (static_cast<double>(j) + 0.5) * dx; }
  /// Left edge of cell j; edge(J) == x_max.
  double edge(std::size_t j) const { return j == J ? x_max : static_cast<double>(j) * dx; }
};

struct LSState {
  LSGrid grid;
  std::vector<double> f;
  double u = 0.0;
  double m = 0.0;
  double t = 0.0;
  double leaked_mass = 0.0;    ///< mass carried out through x_max so far
  double leaked_number = 0.0;

  /// <f, phi> by the midpoint sum over cells.
  template <class F>
  double pair(F&& phi) const {
    long double s = 0.0L;
    for (std::size_t j = 0; j < f.size(); ++j) s += static_cast<long double>(phi(grid.center(j))) * f[j];
    return static_cast<double>(s * grid.dx);
  }

  double number() const { return pair([](double) { return 1.0; }); }
  double mass() const { return pair([](double x) { return x; }); }
};

/// Cell averages of f0 (4-point Gauss-Legendre per cell); u closes the mass.
inline LSState initial_state(const LSGrid& grid, double m, const std::function<double(double)>& f0 = {}) {
  LSState s;
  s.grid = grid;
  s.m = m;
  s.f.assign(grid.J, 0.0);
  if (f0) {
    static constexpr double node[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563, 0.8611363115940526};
    static constexpr double weight[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461, 0.3478548451374538};
    for (std::size_t j = 0; j < grid.J; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 4; ++k) acc += weight[k] * f0(grid.center(j) + 0.5 * grid.dx * node[k]);
      s.f[j] = 0.5 * acc;
      require(s.f[j] >= 0.0, ErrorKind::InvalidArgument, "initial density must be nonnegative");
    }
  }
  s.u = m - s.mass();
  require(s.u >= 0.0, ErrorKind::InvalidArgument, "initial cluster mass exceeds m");
  return s;
}

inline double edge_velocity(const RateModel& model, double u, double x) { return model.a(x) * u - model.b(x); }

/// Prescribed inflow alpha u^2 while the boundary is incoming (u > rho);
/// zero when outgoing or at the tie u == rho (the scheme upwinds outflow).
inline double boundary_influx(const RateModel& model, const Regime& regime, double u) {
  if (regime.kind == RegimeKind::FragmentationDominant) return 0.0;
  return regime.rho.compare(u) > 0 ? model.alpha * u * u : 0.0;
}

/// Edge rates cached for a fixed grid.
class LSOperator {
 public:
  LSOperator(const RateModel& model, const LSGrid& grid, const Regime& regime)
      : model_(model), grid_(grid), regime_(regime), a_(grid.J + 1), b_(grid.J + 1) {
    for (std::size_t j = 0; j <= grid.J; ++j) {
      a_[j] = model.a(grid.edge(j));
      b_[j] = model.b(grid.edge(j));
      require(std::isfinite(a_[j]) && std::isfinite(b_[j]), ErrorKind::NonFinite, "rate not finite on the grid");
    }
  }

  const RateModel& model() const { return model_; }
  const LSGrid& grid() const { return grid_; }
  const Regime& regime() const { return regime_; }

  double velocity(std::size_t edge, double u) const { return a_[edge] * u - b_[edge]; }

  /// Largest stable step for CFL number 1 at concentration u: dx divided
  /// by the largest edge speed or the largest total outflow speed of a cell.
  double stable_dt(double u) const {
    double vmax = 0.0;
    for (std::size_t j = 0; j < grid_.J; ++j) {
      const double vl = velocity(j, u);
      const double vr = velocity(j + 1, u);
      vmax = std::max({vmax, std::abs(vl), std::abs(vr), std::max(vr, 0.0) + std::max(-vl, 0.0)});
    }
    return vmax > 0.0 ? grid_.dx / vmax : std::numeric_limits<double>::infinity();
  }

  double influx(double u) const { return boundary_influx(model_, regime_, u); }

  /// Upwind flux through edge 0 (positive = into the domain).
  double left_flux(const LSState& s) const {
    const double in = influx(s.u);
    if (in > 0.0) return in;
    if (regime_.rho.compare(s.u) == 0 && regime_.kind != RegimeKind::FragmentationDominant) return 0.0;
    const double v = velocity(0, s.u);
    return v < 0.0 ? v * s.f[0] : 0.0;
  }

 private:
  RateModel model_;
  LSGrid grid_;
  Regime regime_;
  std::vector<double> a_;
  std::vector<double> b_;
};

/// One explicit conservative upwind step followed by the algebraic closure
/// u = m - <f, x> - leaked mass.
inline LSState step_upwind(const LSState& s, const LSOperator& op, double dt, double cfl = 0.9) {
  require(dt > 0.0 && std::isfinite(dt), ErrorKind::InvalidArgument, "dt must be positive");
  require(cfl > 0.0 && cfl <= 1.0, ErrorKind::InvalidArgument, "CFL number must be in (0, 1]");
  const double bound = cfl * op.stable_dt(s.u);
  if (dt > bound * (1.0 + 1e-12))
    fail(ErrorKind::CFLViolation, "dt = " + std::to_string(dt) + " exceeds the CFL bound " + std::to_string(bound));
  const LSGrid& g = s.grid;
  const std::size_t J = g.J;
  std::vector<double> flux(J + 1);
  flux[0] = op.left_flux(s);
  for (std::size_t j = 1; j < J; ++j) {
    const double v = op.velocity(j, s.u);
    flux[j] = v > 0.0 ? v * s.f[j - 1] : v * s.f[j];
  }
  const double v_out = op.velocity(J, s.u);
  flux[J] = v_out > 0.0 ? v_out * s.f[J - 1] : 0.0;

  LSState out = s;
  const double lambda = dt / g.dx;
  for (std::size_t j = 0; j < J; ++j) {
    out.f[j] = s.f[j] - lambda * (flux[j + 1] - flux[j]);
    if (out.f[j] < -1e-12)
      fail(ErrorKind::NegativeDensity, "f[" + std::to_string(j) + "] = " + std::to_string(out.f[j]));
  }
  out.leaked_number += dt * flux[J];
  out.leaked_mass += dt * flux[J] * g.center(J - 1);
  out.t = s.t + dt;
  out.u = s.m - out.mass() - out.leaked_mass;
  return out;
}

struct LSSeriesRow {
  double t = 0.0;
  double u = 0.0;
  double number = 0.0;  ///< <f, 1>
  double mass = 0.0;    ///< <f, x>
  double influx = 0.0;
  double leaked_mass = 0.0;
};

struct LSOptions {
  double t_end = 1.0;
  double cfl = 0.9;
  std::vector<double> output_times;    ///< must lie in [t0, t_end]
  std::vector<double> snapshot_times;
  std::optional<Regime> regime;        ///< overrides classify_regime(model)
  /// Uniform: dt = cfl times the stable step over all u in [0, m], fixed for
  /// the run so dt shrinks with dx. Adaptive: cfl times the stable step at
  /// the current u.
  enum class StepRule { Uniform, Adaptive } step_rule = StepRule::Uniform;
  std::size_t max_steps = 100'000'000;
};

struct LSRun {
  std::vector<LSSeriesRow> series;
  std::vector<LSState> snapshots;
  LSState final_state;
  std::size_t steps = 0;
  Regime regime{RegimeKind::Balanced, Rho::finite(0.0)};
  std::optional<double> crossing_time;  ///< first sign change of u - rho
  double max_conservation_drift = 0.0;  ///< max |u + <f,x> + leaked - m|
};

/// Steps to t_end, landing exactly on every output and snapshot time.
inline LSRun solve_ls(const RateModel& model, LSState init, const LSOptions& opts) {
  LSRun run;
  run.regime = opts.regime ? *opts.regime : classify_regime(model);
  LSOperator op(model, init.grid, run.regime);
  require(opts.t_end >= init.t, ErrorKind::InvalidArgument, "t_end before the initial time");

  std::vector<double> stops(opts.output_times);
  stops.insert(stops.end(), opts.snapshot_times.begin(), opts.snapshot_times.end());
  stops.push_back(opts.t_end);
  std::sort(stops.begin(), stops.end());
  stops.erase(std::unique(stops.begin(), stops.end()), stops.end());
  for (double t : stops)
    require(t >= init.t && t <= opts.t_end, ErrorKind::InvalidArgument, "output time outside the run window");

  std::size_t next_out = 0, next_snap = 0;
  auto emit = [&](const LSState& s) {
    while (next_out < opts.output_times.size() && opts.output_times[next_out] <= s.t) {
      run.series.push_back({opts.output_times[next_out++], s.u, s.number(), s.mass(), op.influx(s.u), s.leaked_mass});
    }
    while (next_snap < opts.snapshot_times.size() && opts.snapshot_times[next_snap] <= s.t) {
      run.snapshots.push_back(s);
      run.snapshots.back().t = opts.snapshot_times[next_snap++];
    }
  };

  LSState s = std::move(init);
  const double mass_scale = std::max(s.m, std::numeric_limits<double>::min());
  auto drift = [&](const LSState& st) { return std::abs(st.u + st.mass() + st.leaked_mass - st.m) / mass_scale; };
  run.max_conservation_drift = drift(s);
  emit(s);
  int side = run.regime.rho.compare(s.u);
  // Speeds are linear in u, so the extreme speeds over [0, m] sit at the ends.
  const double uniform_dt = opts.cfl * std::min(op.stable_dt(0.0), op.stable_dt(s.m));
  for (double target : stops) {
    while (s.t < target) {
      double dt = opts.step_rule == LSOptions::StepRule::Uniform ? uniform_dt : opts.cfl * op.stable_dt(s.u);
      if (!std::isfinite(dt)) dt = target - s.t;
      bool land = false;
      if (!(dt < target - s.t)) {
        dt = target - s.t;
        land = true;
      }
      LSState next = step_upwind(s, op, dt, opts.cfl);
      if (land) next.t = target;
      const int new_side = run.regime.rho.compare(next.u);
      if (!run.crossing_time && new_side != side && side != 0) {
        const double r = run.regime.rho.is_infinite() ? 0.0 : run.regime.rho.value();
        const double w = (s.u - r) / (s.u - next.u);
        run.crossing_time = s.t + std::clamp(w, 0.0, 1.0) * (next.t - s.t);
      }
      side = new_side;
      s = std::move(next);
      run.max_conservation_drift = std::max(run.max_conservation_drift, drift(s));
      if (++run.steps > opts.max_steps) fail(ErrorKind::StallError, "LS step budget exhausted");
      emit(s);
    }
  }
  run.final_state = std::move(s);
  return run;
}

}  // namespace sbd
