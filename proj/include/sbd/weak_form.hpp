#pragma once

// Residual of the weak Lifshitz-Slyozov equation
//   <mu_t, phi> - <mu_t0, phi> - int int phi'(x) (a(x) u - b(x)) mu_s(dx) ds - phi(0) int alpha u^2 ds
// along a sequence of snapshots (PDE states or empirical measures), with
// the time integrals by the trapezoid rule.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <span>
#include <string>
#include <vector>

#include "sbd/error.hpp"
#include "sbd/kinetics.hpp"
#include "sbd/test_functions.hpp"

namespace sbd {

template <class S>
concept WeakSnapshot = requires(const S& s, double (*phi)(double)) {
  { s.pair(phi) } -> std::convertible_to<double>;
  { s.u } -> std::convertible_to<double>;
};

struct WeakResidual {
  std::string name;
  double max_residual = 0.0;    ///< max over snapshot times
  double final_residual = 0.0;  ///< at the last snapshot
};

template <WeakSnapshot S>
std::vector<WeakResidual> weak_form_residual(std::span<const S> snaps, std::span<const double> times, const RateModel& model,
                                             std::span<const TestFunction> dict) {
  require(snaps.size() == times.size() && snaps.size() >= 2, ErrorKind::InvalidArgument,
          "need at least two snapshots with matching times");
  const double step = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
  for (std::size_t k = 1; k < times.size(); ++k)
    require(std::abs(times[k] - times[k - 1] - step) <= 1e-9 * std::max(1.0, std::abs(step)), ErrorKind::InvalidArgument,
            "snapshot times must be uniform");
  std::vector<WeakResidual> out;
  for (const auto& tf : dict) {
    const auto& phi = tf.phi;
    const auto& dphi = tf.dphi;
    auto drift = [&](const S& s) {
      const double with_a = s.pair([&](double x) { return dphi(x) * model.a(x); });
      const double with_b = s.pair([&](double x) { return dphi(x) * model.b(x); });
      return s.u * with_a - with_b;
    };
    auto source = [&](const S& s) { return model.alpha * s.u * s.u; };
    const double phi0 = phi(0.0);
    const double base = snaps[0].pair(phi);
    double g_prev = drift(snaps[0]);
    double h_prev = source(snaps[0]);
    double ig = 0.0, ih = 0.0;
    WeakResidual r{tf.name, 0.0, 0.0};
    for (std::size_t k = 1; k < snaps.size(); ++k) {
      const double dt = times[k] - times[k - 1];
      const double g = drift(snaps[k]);
      const double h = source(snaps[k]);
      ig += 0.5 * dt * (g_prev + g);
      ih += 0.5 * dt * (h_prev + h);
      g_prev = g;
      h_prev = h;
      const double res = std::abs(snaps[k].pair(phi) - base - ig - phi0 * ih);
      r.max_residual = std::max(r.max_residual, res);
      r.final_residual = res;
    }
    out.push_back(r);
  }
  return out;
}

/// Richardson-style error estimate: residuals of a run and of its refinement
/// (grid and snapshot spacing halved). For a first-order residual the
/// coarse residual is about twice this difference.
inline std::vector<double> residual_error_estimate(std::span<const WeakResidual> coarse, std::span<const WeakResidual> fine) {
  require(coarse.size() == fine.size(), ErrorKind::InvalidArgument, "residual lists differ in length");
  std::vector<double> e(coarse.size());
  for (std::size_t i = 0; i < coarse.size(); ++i) e[i] = std::abs(coarse[i].max_residual - fine[i].max_residual);
  return e;
}

}  // namespace sbd
