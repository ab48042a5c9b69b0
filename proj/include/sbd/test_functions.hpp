#pragma once

// Test-function dictionaries: a bounded-Lipschitz family for the flat
// distance and a small smooth family for weak-form residuals.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace sbd {

struct TestFunction {
  std::string name;
  std::function<double(double)> phi;
  std::function<double(double)> dphi;
};

/// max |d/dt (1 - t^2)^2| on [-1, 1], attained at t = 1/sqrt(3).
inline constexpr double kBumpSlope = 1.5396007178390020;

/// h (1 - t^2)^2 with t = (x - c) / w on |t| < 1, zero elsewhere (C^1).
inline TestFunction bump(double c, double w, double h, std::string name) {
  auto phi = [c, w, h](double x) {
    const double t = (x - c) / w;
    if (std::abs(t) >= 1.0) return 0.0;
    const double s = 1.0 - t * t;
    return h * s * s;
  };
  auto dphi = [c, w, h](double x) {
    const double t = (x - c) / w;
    if (std::abs(t) >= 1.0) return 0.0;
    return -4.0 * h * t * (1.0 - t * t) / w;
  };
  return {std::move(name), phi, dphi};
}

/// h clamp((x - c) / w, 0, 1).
inline TestFunction clipped_ramp(double c, double w, double h, std::string name) {
  auto phi = [c, w, h](double x) { return h * std::clamp((x - c) / w, 0.0, 1.0); };
  auto dphi = [c, w, h](double x) { return x > c && x < c + w ? h / w : 0.0; };
  return {std::move(name), phi, dphi};
}

/// 64 functions with sup|phi| + sup|phi'| <= 1: bumps at 8 centers and 4
/// widths, and ramps at 8 starts and 4 widths, covering sizes in [0, 4].
inline std::vector<TestFunction> flat_dictionary() {
  std::vector<TestFunction> out;
  const double widths[4] = {0.25, 0.5, 1.0, 2.0};
  for (int k = 0; k < 8; ++k) {
    const double c = 0.25 + 0.5 * k;
    for (double w : widths)
      out.push_back(bump(c, w, 1.0 / (1.0 + kBumpSlope / w), "bump_c" + std::to_string(c) + "_w" + std::to_string(w)));
  }
  for (int k = 0; k < 8; ++k) {
    const double c = 0.5 * k;
    for (double w : widths)
      out.push_back(clipped_ramp(c, w, 1.0 / (1.0 + 1.0 / w), "ramp_c" + std::to_string(c) + "_w" + std::to_string(w)));
  }
  return out;
}

/// phi = 1, x times a bump, interior bumps, a bump touching x = 0 and a C^1
/// cutoff equal to 1 on [0, 1] and 0 beyond 3.
inline std::vector<TestFunction> weak_form_dictionary() {
  std::vector<TestFunction> out;
  out.push_back({"one", [](double) { return 1.0; }, [](double) { return 0.0; }});
  {
    auto b = bump(1.0, 1.0, 1.0, "");
    out.push_back({"x_bump", [b](double x) { return x * b.phi(x); }, [b](double x) { return b.phi(x) + x * b.dphi(x); }});
  }
  out.push_back(bump(0.0, 1.0, 1.0, "bump_c0_w1"));
  out.push_back(bump(0.5, 0.5, 1.0, "bump_c0.5_w0.5"));
  out.push_back(bump(1.0, 0.5, 1.0, "bump_c1_w0.5"));
  out.push_back(bump(1.5, 1.0, 1.0, "bump_c1.5_w1"));
  out.push_back(bump(2.0, 1.0, 1.0, "bump_c2_w1"));
  out.push_back({"cutoff",
                 [](double x) {
                   const double s = std::clamp((x - 1.0) / 2.0, 0.0, 1.0);
                   return 1.0 - s * s * (3.0 - 2.0 * s);
                 },
                 [](double x) {
                   const double s = (x - 1.0) / 2.0;
                   return s > 0.0 && s < 1.0 ? -3.0 * s * (1.0 - s) : 0.0;
                 }});
  return out;
}

}  // namespace sbd
