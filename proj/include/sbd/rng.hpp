#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace sbd {

/// SplitMix64 finalizer; decorrelates nearby seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of the independent stream owned by trajectory `index`.
constexpr std::uint64_t stream_seed(std::uint64_t master_seed, std::uint64_t index) {
  return splitmix64(splitmix64(master_seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

/// Per-trajectory random stream. Draws are defined bit-for-bit here rather
/// than through std:: distributions, whose output is implementation-defined.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}
  RandomStream(std::uint64_t master_seed, std::uint64_t index) : engine_(stream_seed(master_seed, index)) {}

  /// Uniform on (0, 1].
  double uniform_open0() { return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53; }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double exponential(double rate) { return -std::log(uniform_open0()) / rate; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace sbd
