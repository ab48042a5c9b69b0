#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "sbd/error.hpp"

namespace sbd {

/// Binary indexed tree over nonnegative weights with O(log n) point update
/// and O(log n) inverse-CDF selection. Grows on demand. The running total is
/// kept separately and recomputed with extended precision on every rebuild;
/// rebuilds happen every `rebuild_interval` updates to flush the rounding
/// drift that incremental deltas leave in the internal nodes.
class FenwickTree {
 public:
  explicit FenwickTree(std::size_t capacity = 16, std::size_t rebuild_interval = 1u << 16)
      : rebuild_interval_(rebuild_interval) {
    resize_capacity(std::bit_ceil(std::max<std::size_t>(capacity, 2)));
  }

  std::size_t capacity() const { return values_.size(); }
  double value(std::size_t i) const { return i < values_.size() ? values_[i] : 0.0; }
  double total() const { return total_; }

  void set(std::size_t i, double v) {
    if (i >= values_.size()) resize_capacity(std::bit_ceil(i + 1));
    const double delta = v - values_[i];
    if (delta == 0.0) return;
    values_[i] = v;
    for (std::size_t k = i + 1; k <= tree_.size(); k += k & (~k + 1)) tree_[k - 1] += delta;
    total_ += delta;
    if (++updates_since_rebuild_ >= rebuild_interval_) rebuild();
  }

  /// Sum of values_[0..i] from the tree nodes.
  double prefix(std::size_t i) const {
    double s = 0.0;
    for (std::size_t k = std::min(i + 1, tree_.size()); k > 0; k -= k & (~k + 1)) s += tree_[k - 1];
    return s;
  }

  /// Index i with positive weight whose cumulative interval contains `target`,
  /// i.e. prefix(i-1) <= target < prefix(i). Rounding can only move the result
  /// onto a zero-weight slot; that case falls back to the nearest positive slot.
  std::size_t find(double target) const {
    require(total_ > 0.0, ErrorKind::InvalidArgument, "selection from an empty tree");
    std::size_t pos = 0;
    for (std::size_t step = tree_.size(); step > 0; step >>= 1) {
      if (pos + step <= tree_.size() && tree_[pos + step - 1] <= target) {
        target -= tree_[pos + step - 1];
        pos += step;
      }
    }
    if (pos < values_.size() && values_[pos] > 0.0) return pos;
    return nearest_positive(pos);
  }

  void rebuild() {
    const std::size_t n = values_.size();
    long double sum = 0.0L;
    for (std::size_t i = 0; i < n; ++i) {
      tree_[i] = values_[i];
      sum += values_[i];
    }
    for (std::size_t k = 1; k <= n; ++k) {
      std::size_t parent = k + (k & (~k + 1));
      if (parent <= n) tree_[parent - 1] += tree_[k - 1];
    }
    total_ = static_cast<double>(sum);
    updates_since_rebuild_ = 0;
  }

 private:
  void resize_capacity(std::size_t cap) {
    values_.resize(cap, 0.0);
    tree_.assign(cap, 0.0);
    rebuild();
  }

  std::size_t nearest_positive(std::size_t pos) const {
    const std::size_t n = values_.size();
    for (std::size_t d = 1; d <= n; ++d) {
      if (pos >= d && pos - d < n && values_[pos - d] > 0.0) return pos - d;
      if (pos + d < n && values_[pos + d] > 0.0) return pos + d;
    }
    fail(ErrorKind::InvariantViolation, "no positive weight in selection tree");
  }

  std::vector<double> values_;
  std::vector<double> tree_;
  double total_ = 0.0;
  std::size_t rebuild_interval_;
  std::size_t updates_since_rebuild_ = 0;
};

}  // namespace sbd
