#pragma once

// Rate models for Becker-Doring kinetics: aggregation/fragmentation laws,
// the epsilon-family used by the rescaled chain, regime classification
// through the boundary threshold rho, and the limit boundary-layer fluxes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sbd/error.hpp"

namespace sbd {

using RateFunction = std::function<double(double)>;

/// Leading power law c * x^exponent of a rate near x = 0.
struct PowerLaw {
  double coef = 1.0;
  double exponent = 0.0;
};

/// A size-dependent rate together with its declared behaviour near zero and
/// its linear growth constant K (rate(x) <= K (1 + x)).
struct RateLaw {
  RateFunction fn;
  PowerLaw near_zero;
  double growth_bound = std::numeric_limits<double>::infinity();
  bool size_independent = false;

  double operator()(double x) const { return fn(x); }
};

inline RateLaw constant_law(double value) {
  require(value > 0.0 && std::isfinite(value), ErrorKind::InvalidArgument,
          "constant rate must be positive and finite");
  return RateLaw{[value](double) { return value; }, {value, 0.0}, value, true};
}

/// Identically zero rate. It carries no near-zero law, so models using it
/// need an explicit regime wherever one is required.
inline RateLaw zero_law() { return RateLaw{[](double) { return 0.0; }, {0.0, 0.0}, 0.0, true}; }

/// c0 + c1 x. The near-zero law is c0 (exponent 0) when c0 > 0, else c1 x.
inline RateLaw linear_law(double c0, double c1) {
  require(c0 >= 0.0 && c1 >= 0.0 && c0 + c1 > 0.0, ErrorKind::InvalidArgument,
          "linear rate needs nonnegative coefficients, not both zero");
  PowerLaw nz = c0 > 0.0 ? PowerLaw{c0, 0.0} : PowerLaw{c1, 1.0};
  return RateLaw{[c0, c1](double x) { return c0 + c1 * x; }, nz, std::max(c0, c1), c1 == 0.0};
}

/// coef * x^exponent.
inline RateLaw power_law(double coef, double exponent) {
  require(coef > 0.0 && exponent >= 0.0, ErrorKind::InvalidArgument,
          "power law needs coef > 0 and exponent >= 0");
  // x^r <= 1 + x for r in [0, 1]; steeper laws have no linear bound.
  double k = exponent <= 1.0 ? coef : std::numeric_limits<double>::infinity();
  return RateLaw{[coef, exponent](double x) { return exponent == 0.0 ? coef : coef * std::pow(x, exponent); },
                 {coef, exponent}, k, exponent == 0.0};
}

/// Piecewise-linear interpolation through (x, y) samples, constant beyond the ends.
class Table {
 public:
  Table(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
    require(x_.size() == y_.size() && x_.size() >= 2, ErrorKind::InvalidArgument,
            "table needs at least two (x, y) rows");
    require(std::is_sorted(x_.begin(), x_.end()) &&
                std::adjacent_find(x_.begin(), x_.end()) == x_.end(),
            ErrorKind::InvalidArgument, "table abscissae must be strictly increasing");
  }

  double operator()(double x) const {
    if (x <= x_.front()) return y_.front();
    if (x >= x_.back()) return y_.back();
    auto hi = std::upper_bound(x_.begin(), x_.end(), x);
    auto k = static_cast<std::size_t>(hi - x_.begin());
    double w = (x - x_[k - 1]) / (x_[k] - x_[k - 1]);
    return (1.0 - w) * y_[k - 1] + w * y_[k];
  }

  std::span<const double> x() const { return x_; }
  std::span<const double> y() const { return y_; }

 private:
  std::vector<double> x_;
  std::vector<double> y_;
};

/// Tabulated law; near-zero metadata and K must be declared by the caller.
inline RateLaw tabulated_law(std::shared_ptr<const Table> table, PowerLaw near_zero, double growth_bound) {
  require(table != nullptr, ErrorKind::InvalidArgument, "null table");
  const auto& ys = table->y();
  bool flat = std::all_of(ys.begin(), ys.end(), [&](double v) { return v == ys.front(); });
  return RateLaw{[table](double x) { return (*table)(x); }, near_zero, growth_bound, flat};
}

/// Kinetic law: aggregation a(x), fragmentation b(x), nucleation alpha and
/// de-nucleation beta.
struct RateModel {
  RateLaw a;
  RateLaw b;
  double alpha = 0.0;
  double beta = 0.0;

  double r_a() const { return a.near_zero.exponent; }
  double r_b() const { return b.near_zero.exponent; }
  double a_bar() const { return a.near_zero.coef; }
  double b_bar() const { return b.near_zero.coef; }
  bool size_independent() const { return a.size_independent && b.size_independent; }
};

// ---------------------------------------------------------------------------
// Sampled invariant checks

/// Geometric grid on [lo, hi] with `per_decade` points per decade, both ends included.
inline std::vector<double> geometric_grid(double lo, double hi, int per_decade = 32) {
  require(lo > 0.0 && hi > lo && per_decade > 0, ErrorKind::InvalidArgument, "bad geometric grid");
  const double decades = std::log10(hi / lo);
  const auto n = static_cast<std::size_t>(std::ceil(decades * per_decade));
  std::vector<double> out(n + 1);
  for (std::size_t k = 0; k <= n; ++k) out[k] = lo * std::pow(10.0, decades * static_cast<double>(k) / static_cast<double>(n));
  out.back() = hi;
  return out;
}

struct SampledCheck {
  bool ok = true;
  double worst = 0.0;  ///< largest violation (growth) or deviation (near zero)
  double at_x = 0.0;
};

/// Linear growth bound rate(x) <= K (1 + x), sampled on [x_min, x_max] and at x = 0.
inline SampledCheck check_growth_bound(const RateLaw& law, double x_min, double x_max) {
  SampledCheck out;
  auto probe = [&](double x) {
    double excess = law(x) / (1.0 + x) - law.growth_bound;
    if (excess > out.worst) {
      out.worst = excess;
      out.at_x = x;
    }
  };
  probe(0.0);
  for (double x : geometric_grid(x_min, x_max)) probe(x);
  out.ok = std::isfinite(law.growth_bound) && out.worst <= 0.0;
  return out;
}

/// rate(x) / (c x^r) -> 1 as x -> 0, judged on the smallest decade of a
/// geometric sequence ending at `x_small`.
inline SampledCheck check_near_zero(const RateLaw& law, double tolerance, double x_small = 1e-8) {
  SampledCheck out;
  for (double x : geometric_grid(x_small, 10.0 * x_small)) {
    double ratio = law(x) / (law.near_zero.coef * std::pow(x, law.near_zero.exponent));
    double dev = std::abs(ratio - 1.0);
    if (!(dev <= out.worst)) {
      out.worst = dev;
      out.at_x = x;
    }
  }
  out.ok = out.worst <= tolerance;
  return out;
}

// ---------------------------------------------------------------------------
// Epsilon family

/// Lattice rates used by the rescaled chain at scale eps. By default the
/// lattice values are the base model evaluated at eps * i.
struct EpsilonFamily {
  RateModel base;
  double eps = 0.0;
  double alpha_eps = 0.0;
  double beta_eps = 0.0;
  std::function<double(std::int64_t)> a_override;
  std::function<double(std::int64_t)> b_override;

  EpsilonFamily() = default;
  EpsilonFamily(RateModel model, double eps_value)
      : base(std::move(model)), eps(eps_value), alpha_eps(base.alpha), beta_eps(base.beta) {
    require(eps > 0.0 && std::isfinite(eps), ErrorKind::InvalidArgument, "eps must be positive");
  }

  double a_eps(std::int64_t i) const { return a_override ? a_override(i) : base.a(eps * static_cast<double>(i)); }
  double b_eps(std::int64_t i) const { return b_override ? b_override(i) : base.b(eps * static_cast<double>(i)); }
};

/// |a^eps(eps i) - a(eps i)| <= tol eps^{r_a} for 2 <= i <= i_max, and the
/// analogous fragmentation bound for 3 <= i <= i_max.
inline SampledCheck check_lattice_consistency(const EpsilonFamily& fam, std::int64_t i_max, double tol) {
  SampledCheck out;
  const double sa = std::pow(fam.eps, fam.base.r_a());
  const double sb = std::pow(fam.eps, fam.base.r_b());
  for (std::int64_t i = 2; i <= i_max; ++i) {
    const double x = fam.eps * static_cast<double>(i);
    double da = std::abs(fam.a_eps(i) - fam.base.a(x)) / sa;
    double db = i >= 3 ? std::abs(fam.b_eps(i) - fam.base.b(x)) / sb : 0.0;
    double d = std::max(da, db);
    if (d > out.worst) {
      out.worst = d;
      out.at_x = x;
    }
  }
  out.ok = out.worst <= tol;
  return out;
}

// ---------------------------------------------------------------------------
// Regime and rho

/// The boundary threshold rho = lim b/a in [0, +inf]. Infinity is symbolic so
/// comparisons against it are exact.
class Rho {
 public:
  static constexpr Rho finite(double value) { return Rho(false, value); }
  static constexpr Rho infinity() { return Rho(true, 0.0); }

  constexpr bool is_infinite() const { return infinite_; }
  double value() const {
    require(!infinite_, ErrorKind::InvalidArgument, "rho is infinite");
    return value_;
  }

  /// Sign of (u - rho): -1, 0 or +1.
  constexpr int compare(double u) const {
    if (infinite_) return -1;
    return u > value_ ? 1 : (u < value_ ? -1 : 0);
  }

  friend constexpr bool operator==(Rho lhs, Rho rhs) {
    return lhs.infinite_ == rhs.infinite_ && (lhs.infinite_ || lhs.value_ == rhs.value_);
  }

 private:
  constexpr Rho(bool inf, double v) : infinite_(inf), value_(v) {}
  bool infinite_;
  double value_;
};

enum class RegimeKind { AggregationDominant, FragmentationDominant, Balanced };

constexpr std::string_view to_string(RegimeKind kind) {
  switch (kind) {
    case RegimeKind::AggregationDominant: return "AggregationDominant";
    case RegimeKind::FragmentationDominant: return "FragmentationDominant";
    case RegimeKind::Balanced: return "Balanced";
  }
  return "Unknown";
}

struct Regime {
  RegimeKind kind;
  Rho rho;
};

inline Regime classify_regime(const RateModel& model) {
  const double ra = model.r_a();
  const double rb = model.r_b();
  require(ra >= 0.0 && rb >= 0.0, ErrorKind::InvalidArgument, "near-zero exponents must be >= 0");
  require(model.a_bar() > 0.0 && model.b_bar() > 0.0, ErrorKind::InvalidArgument,
          "near-zero prefactors must be positive");
  if (std::min(ra, rb) >= 1.0)
    fail(ErrorKind::UnsupportedRegime, "min(r_a, r_b) >= 1: no boundary condition is identified");
  if (ra < rb) return {RegimeKind::AggregationDominant, Rho::finite(0.0)};
  if (rb < ra) return {RegimeKind::FragmentationDominant, Rho::infinity()};
  return {RegimeKind::Balanced, Rho::finite(model.b_bar() / model.a_bar())};
}

// ---------------------------------------------------------------------------
// Boundary-layer rates and fluxes

/// a_n = a_bar (n+2)^{r_a} and b_n = b_bar (n+2)^{r_b} for 0 <= n <= n_max.
struct DiscreteRates {
  std::vector<double> a;
  std::vector<double> b;

  std::size_t n_max() const { return a.empty() ? 0 : a.size() - 1; }
};

inline DiscreteRates discrete_rates(const RateModel& model, std::size_t n_max) {
  require(n_max >= 1, ErrorKind::InvalidArgument, "n_max must be >= 1");
  DiscreteRates out;
  out.a.resize(n_max + 1);
  out.b.resize(n_max + 1);
  for (std::size_t n = 0; n <= n_max; ++n) {
    const double s = static_cast<double>(n + 2);
    out.a[n] = model.r_a() == 0.0 ? model.a_bar() : model.a_bar() * std::pow(s, model.r_a());
    out.b[n] = model.r_b() == 0.0 ? model.b_bar() : model.b_bar() * std::pow(s, model.r_b());
  }
  return out;
}

/// Becker-Doring flux J_n between boundary-layer components n and n+1 at
/// frozen concentration c. J_{-1} = 0.
inline double flux_j(const Regime& regime, const DiscreteRates& rates, double c, std::span<const double> q,
                     std::ptrdiff_t n) {
  if (n < 0) return 0.0;
  const auto k = static_cast<std::size_t>(n);
  auto q_at = [&](std::size_t i) {
    require(i < q.size(), ErrorKind::IndexOutOfRange, "sequence too short for flux index");
    return q[i];
  };
  auto a_at = [&](std::size_t i) {
    require(i < rates.a.size(), ErrorKind::IndexOutOfRange, "aggregation rate index out of range");
    return rates.a[i];
  };
  auto b_at = [&](std::size_t i) {
    require(i < rates.b.size(), ErrorKind::IndexOutOfRange, "fragmentation rate index out of range");
    return rates.b[i];
  };
  switch (regime.kind) {
    case RegimeKind::Balanced: return a_at(k) * c * q_at(k) - b_at(k + 1) * q_at(k + 1);
    case RegimeKind::AggregationDominant: return a_at(k) * c * q_at(k);
    case RegimeKind::FragmentationDominant: return -b_at(k + 1) * q_at(k + 1);
  }
  return 0.0;
}

}  // namespace sbd
