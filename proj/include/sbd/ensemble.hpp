#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <mutex>
#include <optional>
#include <span>
#include <thread>
#include <vector>

#include "sbd/error.hpp"

namespace sbd {

/// Runs fn(i) for i in [0, n) on up to `workers` threads and returns the
/// results ordered by index. Any exception is rethrown after all workers
/// stop; when several jobs fail, the one with the smallest index wins so the
/// reported error does not depend on scheduling.
template <class F>
auto run_indexed(std::size_t n, unsigned workers, F&& fn) -> std::vector<decltype(fn(std::size_t{}))> {
  using R = decltype(fn(std::size_t{}));
  std::vector<std::optional<R>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      try {
        slots[i].emplace(fn(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned w = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (w == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(w);
    for (unsigned k = 0; k < w; ++k) pool.emplace_back(work);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<R> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

inline unsigned default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

/// Sample mean and standard error (sample standard deviation / sqrt(n)).
inline MeanSe mean_se(std::span<const double> xs) {
  MeanSe r;
  r.n = xs.size();
  if (xs.empty()) return r;
  long double s = 0.0L;
  for (double x : xs) s += x;
  r.mean = static_cast<double>(s / static_cast<long double>(xs.size()));
  if (xs.size() < 2) return r;
  long double ss = 0.0L;
  for (double x : xs) ss += (x - r.mean) * static_cast<long double>(x - r.mean);
  r.se = static_cast<double>(std::sqrt(ss / static_cast<long double>(xs.size() - 1) / static_cast<long double>(xs.size())));
  return r;
}

}  // namespace sbd
