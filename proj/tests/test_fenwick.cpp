#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "sbd/fenwick.hpp"

using sbd::FenwickTree;

namespace {

// Linear scan: first index whose cumulative sum exceeds target.
std::size_t brute_find(const std::vector<double>& w, double target) {
  double c = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    c += w[i];
    if (target < c && w[i] > 0.0) return i;
  }
  return w.size();
}

double ulp(double x) { return std::nextafter(x, INFINITY) - x; }

}  // namespace

TEST(Fenwick, SelectionMatchesLinearScan) {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> val(0.0, 3.0);
  FenwickTree tree(4);
  std::vector<double> w(300, 0.0);
  for (int round = 0; round < 2000; ++round) {
    std::size_t i = gen() % w.size();
    double v = (gen() % 4 == 0) ? 0.0 : val(gen);
    w[i] = v;
    tree.set(i, v);
    if (tree.total() <= 0.0) continue;
    // Probe at interval midpoints so rounding cannot flip the answer.
    std::size_t k = gen() % w.size();
    if (w[k] == 0.0) continue;
    double before = 0.0;
    for (std::size_t j = 0; j < k; ++j) before += w[j];
    EXPECT_EQ(tree.find(before + 0.5 * w[k]), k);
    EXPECT_EQ(brute_find(w, before + 0.5 * w[k]), k);
  }
}

TEST(Fenwick, TotalWithinFourUlpOfPartialsAfterRebuild) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> val(0.0, 1e3);
  FenwickTree tree(8, 1u << 10);
  std::vector<double> w(5000, 0.0);
  for (int round = 0; round < 50000; ++round) {
    std::size_t i = gen() % w.size();
    w[i] = val(gen);
    tree.set(i, w[i]);
  }
  tree.rebuild();
  long double exact = 0.0L;
  for (double v : w) exact += v;
  EXPECT_LE(std::abs(tree.total() - static_cast<double>(exact)), 4.0 * ulp(tree.total()));
}

TEST(Fenwick, ZeroedSlotsAreNeverSelected) {
  FenwickTree tree(4);
  tree.set(3, 1e-3);
  tree.set(5, 1e6);
  tree.set(5, 0.0);  // leaves rounding residue in the inner nodes
  for (double frac : {0.0, 0.5, 0.999999}) EXPECT_EQ(tree.find(frac * tree.total()), 3u);
}

TEST(Fenwick, GrowsOnDemand) {
  FenwickTree tree(2);
  tree.set(1000, 2.0);
  EXPECT_GE(tree.capacity(), 1001u);
  tree.set(1, 1.0);
  EXPECT_DOUBLE_EQ(tree.total(), 3.0);
  EXPECT_EQ(tree.find(0.5), 1u);
  EXPECT_EQ(tree.find(1.5), 1000u);
  EXPECT_DOUBLE_EQ(tree.prefix(999), 1.0);
}
