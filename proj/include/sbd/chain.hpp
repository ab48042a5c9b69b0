#pragma once

// State of the Becker-Doring Markov chain, its jumps, the reference
// propensity formulas, the rescaled empirical measure and the occupation
// accumulator for small-cluster counts.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sbd/error.hpp"
#include "sbd/kinetics.hpp"

namespace sbd {

using Count = std::int64_t;

/// Free-particle count n1 plus cluster counts k_i (i >= 2) with conserved
/// total mass M = n1 + sum_i i k_i. Counts are stored densely by size; a
/// zero entry is an absent size.
class ChainState {
 public:
  ChainState() = default;

  static ChainState pure_monomer(Count total_mass) {
    require(total_mass >= 0, ErrorKind::InvalidArgument, "total mass must be nonnegative");
    ChainState s;
    s.n1_ = total_mass;
    s.mass_ = total_mass;
    return s;
  }

  /// Tabulated initial condition; M is derived from the counts.
  static ChainState from_counts(Count n1, std::span<const std::pair<Count, Count>> clusters) {
    require(n1 >= 0, ErrorKind::InvalidArgument, "monomer count must be nonnegative");
    ChainState s;
    s.n1_ = n1;
    for (auto [i, k] : clusters) {
      require(i >= 2, ErrorKind::InvalidArgument, "cluster sizes start at 2");
      require(k >= 0, ErrorKind::InvalidArgument, "cluster counts must be nonnegative");
      s.add(i, k);
    }
    s.mass_ = n1 + s.cluster_mass_;
    return s;
  }

  Count monomers() const { return n1_; }
  Count total_mass() const { return mass_; }
  Count cluster_number() const { return cluster_number_; }
  Count cluster_mass() const { return cluster_mass_; }
  /// Largest size index ever allocated (an upper bound on occupied sizes).
  Count size_bound() const { return static_cast<Count>(counts_.size()) - 1; }

  Count count(Count i) const {
    return i >= 2 && i < static_cast<Count>(counts_.size()) ? counts_[static_cast<std::size_t>(i)] : 0;
  }

  template <class F>
  void for_each_cluster(F&& f) const {
    for (std::size_t i = 2; i < counts_.size(); ++i)
      if (counts_[i] != 0) f(static_cast<Count>(i), counts_[i]);
  }

  /// Full recomputation of n1 + sum i k_i == M.
  bool mass_identity_holds() const {
    Count mass = n1_;
    Count number = 0;
    bool nonneg = n1_ >= 0;
    for_each_cluster([&](Count i, Count k) {
      mass += i * k;
      number += k;
      nonneg = nonneg && k > 0;
    });
    return nonneg && mass == mass_ && number == cluster_number_ && mass - n1_ == cluster_mass_;
  }

  double time = 0.0;

 private:
  friend struct EventApplier;

  void add(Count i, Count delta) {
    if (i >= static_cast<Count>(counts_.size())) counts_.resize(static_cast<std::size_t>(std::max<Count>(i + 1, 2 * static_cast<Count>(counts_.size()))), 0);
    counts_[static_cast<std::size_t>(i)] += delta;
    cluster_number_ += delta;
    cluster_mass_ += i * delta;
  }

  Count n1_ = 0;
  Count mass_ = 0;
  Count cluster_number_ = 0;
  Count cluster_mass_ = 0;
  std::vector<Count> counts_;
};

enum class EventKind { Nucleation, Denucleation, Aggregation, Fragmentation };

struct Event {
  EventKind kind;
  Count size = 0;  ///< source cluster size for aggregation/fragmentation
};

struct EventApplier {
  /// In-place jump. With `monomer_reservoir` the free-particle count is held
  /// fixed (frozen bath) and total mass is not tracked.
  static void apply(ChainState& s, const Event& e, bool monomer_reservoir = false) {
    auto need = [](bool ok, const char* what) {
      if (!ok) fail(ErrorKind::NegativeCount, what);
    };
    const bool track = !monomer_reservoir;
    switch (e.kind) {
      case EventKind::Nucleation:
        need(!track || s.n1_ >= 2, "nucleation needs two free particles");
        if (track) s.n1_ -= 2;
        s.add(2, 1);
        break;
      case EventKind::Denucleation:
        need(s.count(2) >= 1, "de-nucleation needs a size-2 cluster");
        s.add(2, -1);
        if (track) s.n1_ += 2;
        break;
      case EventKind::Aggregation:
        need(e.size >= 2 && s.count(e.size) >= 1, "aggregation source size is empty");
        need(!track || s.n1_ >= 1, "aggregation needs a free particle");
        s.add(e.size, -1);
        s.add(e.size + 1, 1);
        if (track) s.n1_ -= 1;
        break;
      case EventKind::Fragmentation:
        need(e.size >= 3 && s.count(e.size) >= 1, "fragmentation source size is empty");
        s.add(e.size, -1);
        s.add(e.size - 1, 1);
        if (track) s.n1_ += 1;
        break;
    }
    if (!track) s.mass_ = s.n1_ + s.cluster_mass_;
  }
};

inline ChainState apply_event(ChainState state, const Event& event) {
  EventApplier::apply(state, event);
  return state;
}

// ---------------------------------------------------------------------------
// Propensities

struct SizeRate {
  Count size;
  double rate;
};

struct Propensities {
  double nucleation = 0.0;
  double denucleation = 0.0;
  double aggregation_total = 0.0;
  double fragmentation_total = 0.0;
  std::vector<SizeRate> aggregation;
  std::vector<SizeRate> fragmentation;

  double total() const { return nucleation + denucleation + aggregation_total + fragmentation_total; }
};

/// Per-index coefficients of the unscaled chain: a_1 (nucleation), b_2
/// (de-nucleation), a_i for i >= 2 and b_i for i >= 3.
struct RawCoefficients {
  std::function<double(Count)> a;
  std::function<double(Count)> b;
  double a1 = 0.0;
  double b2 = 0.0;
};

namespace detail {
inline double checked_rate(long double r, const char* what) {
  const auto d = static_cast<double>(r);
  if (!std::isfinite(d) || d < 0.0) fail(ErrorKind::NonFinite, std::string("non-finite or negative rate: ") + what);
  return d;
}

template <class AggCoef, class FragCoef>
Propensities gather(const ChainState& s, long double nucleation, long double denucleation, long double agg_factor,
                    AggCoef&& agg, FragCoef&& frag) {
  Propensities p;
  p.nucleation = checked_rate(nucleation, "nucleation");
  p.denucleation = checked_rate(denucleation, "denucleation");
  long double at = 0.0L, ft = 0.0L;
  s.for_each_cluster([&](Count i, Count k) {
    double ra = checked_rate(static_cast<long double>(agg(i)) * agg_factor * k, "aggregation");
    p.aggregation.push_back({i, ra});
    at += ra;
    if (i >= 3) {
      double rf = checked_rate(static_cast<long double>(frag(i)) * k, "fragmentation");
      p.fragmentation.push_back({i, rf});
      ft += rf;
    }
  });
  p.aggregation_total = static_cast<double>(at);
  p.fragmentation_total = static_cast<double>(ft);
  return p;
}
}  // namespace detail

/// Mass-action rates of the unscaled chain.
inline Propensities propensities_raw(const ChainState& s, const RawCoefficients& c) {
  const long double n1 = static_cast<long double>(s.monomers());
  return detail::gather(s, c.a1 * n1 * (n1 - 1.0L), c.b2 * static_cast<long double>(s.count(2)), n1, c.a, c.b);
}

/// Integer-count rates of the rescaled chain, with u = eps^2 n1 and cluster
/// weights eps k_i: nucleation alpha eps^3 n1 (n1 - 1), de-nucleation
/// beta k_2, aggregation a(eps i) eps n1 k_i, fragmentation b(eps i) k_i / eps.
inline Propensities propensities_rescaled(const ChainState& s, const EpsilonFamily& fam) {
  const long double eps = fam.eps;
  const long double n1 = static_cast<long double>(s.monomers());
  return detail::gather(
      s, fam.alpha_eps * eps * eps * eps * n1 * (n1 - 1.0L), fam.beta_eps * static_cast<long double>(s.count(2)),
      eps * n1, [&](Count i) { return fam.a_eps(i); },
      [&](Count i) { return static_cast<double>(static_cast<long double>(fam.b_eps(i)) / eps); });
}

// ---------------------------------------------------------------------------
// Rescaled empirical measure

struct Atom {
  double x;
  double weight;
};

/// mu = sum_i eps k_i delta_{eps i}, u = eps^2 n1, m = eps^2 M. The integer
/// counts it was built from are kept so the mass identity can be checked
/// without rounding.
struct EmpiricalMeasure {
  double eps = 0.0;
  std::vector<Atom> atoms;
  double u = 0.0;
  double m = 0.0;
  Count monomers = 0;
  Count cluster_number = 0;
  Count cluster_mass = 0;

  double number() const { return eps * static_cast<double>(cluster_number); }
  double mass() const { return eps * eps * static_cast<double>(cluster_mass); }

  /// <mu, phi>.
  template <class F>
  double pair(F&& phi) const {
    double s = 0.0;
    for (const auto& a : atoms) s += a.weight * phi(a.x);
    return s;
  }
};

inline EmpiricalMeasure snapshot_measure(const ChainState& s, double eps) {
  EmpiricalMeasure mu;
  mu.eps = eps;
  const double eps2 = eps * eps;
  s.for_each_cluster([&](Count i, Count k) { mu.atoms.push_back({eps * static_cast<double>(i), eps * static_cast<double>(k)}); });
  mu.monomers = s.monomers();
  mu.cluster_number = s.cluster_number();
  mu.cluster_mass = s.cluster_mass();
  mu.u = eps2 * static_cast<double>(s.monomers());
  mu.m = eps2 * static_cast<double>(s.total_mass());
  return mu;
}

// ---------------------------------------------------------------------------
// Occupation of the small-cluster sequence p_n = eps k_{n+2}

/// Time integrals of p_n over [t0, t1] for n <= n_max, split into equal
/// batches (batch means give Monte Carlo error bars).
class OccupationAccumulator {
 public:
  OccupationAccumulator() = default;
  OccupationAccumulator(double eps, double t0, double t1, std::size_t n_max = 32, std::size_t batches = 1)
      : eps_(eps), t0_(t0), t1_(t1), n_max_(n_max), sums_(batches, std::vector<double>(n_max + 1, 0.0)) {
    require(t1 >= t0, ErrorKind::InvalidArgument, "occupation window must have t1 >= t0");
    require(batches >= 1, ErrorKind::InvalidArgument, "at least one batch");
  }

  double eps() const { return eps_; }
  double t0() const { return t0_; }
  double t1() const { return t1_; }
  double length() const { return t1_ - t0_; }
  std::size_t n_max() const { return n_max_; }
  std::size_t batches() const { return sums_.size(); }
  bool empty() const { return sums_.empty(); }

  /// Adds the contribution of a state held constant on [from, to).
  void accumulate(const ChainState& s, double from, double to) {
    require(to >= from, ErrorKind::InvalidArgument, "negative dwell");
    if (sums_.empty() || to <= t0_ || from >= t1_ || t1_ <= t0_) return;
    const double lo = std::max(from, t0_);
    const double hi = std::min(to, t1_);
    const double width = length() / static_cast<double>(sums_.size());
    auto b_lo = static_cast<std::size_t>((lo - t0_) / width);
    b_lo = std::min(b_lo, sums_.size() - 1);
    for (std::size_t b = b_lo; b < sums_.size(); ++b) {
      const double blo = t0_ + width * static_cast<double>(b);
      const double bhi = b + 1 == sums_.size() ? t1_ : blo + width;
      const double d = std::min(hi, bhi) - std::max(lo, blo);
      if (d > 0.0)
        for (std::size_t n = 0; n <= n_max_; ++n) {
          Count k = s.count(static_cast<Count>(n) + 2);
          if (k != 0) sums_[b][n] += d * eps_ * static_cast<double>(k);
        }
      if (bhi >= hi) break;
    }
  }

  /// Integral of p_n over the whole window.
  double sum(std::size_t n) const {
    double s = 0.0;
    for (const auto& b : sums_) s += b.at(n);
    return s;
  }

  /// Time average of p_n over batch b.
  double batch_average(std::size_t b, std::size_t n) const {
    return sums_.at(b).at(n) / (length() / static_cast<double>(sums_.size()));
  }

  double time_average(std::size_t n) const { return sum(n) / length(); }

 private:
  double eps_ = 1.0;
  double t0_ = 0.0;
  double t1_ = 0.0;
  std::size_t n_max_ = 32;
  std::vector<std::vector<double>> sums_;
};

inline OccupationAccumulator accumulate_occupation(OccupationAccumulator acc, const ChainState& state_before, double dwell) {
  require(dwell >= 0.0, ErrorKind::InvalidArgument, "dwell must be nonnegative");
  acc.accumulate(state_before, state_before.time, state_before.time + dwell);
  return acc;
}

}  // namespace sbd
