#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "docdisc/emd.hpp"
#include "docdisc/mean_shift.hpp"
#include "oracles.hpp"

using namespace docdisc;

namespace {

std::vector<double> random_histogram(std::mt19937_64& rng, int n, bool sparse) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> h(n);
  double s = 0;
  for (double& v : h) s += (v = (sparse && u(rng) < 0.4) ? 0.0 : u(rng));
  if (s == 0) {
    h[0] = 1;
    s = 1;
  }
  for (double& v : h) v /= s;
  return h;
}

CostMatrix line_cost(int n) {
  CostMatrix c(n, std::vector<double>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) c[i][j] = std::abs(i - j);
  return c;
}

}  // namespace

TEST(MeanShift, IdenticalPointsFormOneCluster) {
  const auto r = mean_shift({{1, 2}, {1, 2}, {1, 2}}, 0.5);
  ASSERT_EQ(r.modes.size(), 1u);
  EXPECT_EQ(r.assignment, (std::vector<int>{0, 0, 0}));
  EXPECT_DOUBLE_EQ(r.modes[0][0], 1.0);
}

TEST(MeanShift, TwoSeparatedPairs) {
  const auto r = mean_shift({{0}, {0.1}, {5}, {5.1}}, 1.0);
  ASSERT_EQ(r.modes.size(), 2u);
  EXPECT_EQ(r.assignment, (std::vector<int>{0, 0, 1, 1}));
  EXPECT_NEAR(r.modes[0][0], 0.05, 1e-12);
  EXPECT_NEAR(r.modes[1][0], 5.05, 1e-12);
}

TEST(MeanShift, SinglePointAndEmpty) {
  const auto one = mean_shift({{3, 4}}, 1.0);
  EXPECT_EQ(one.assignment, (std::vector<int>{0}));
  EXPECT_TRUE(mean_shift({}, 1.0).modes.empty());
}

TEST(MeanShift, RecoversWellSeparatedBlobs) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 0.3);
  std::vector<std::vector<double>> pts;
  for (int i = 0; i < 60; ++i) {
    const double c = 10.0 * (i % 3);
    pts.push_back({c + g(rng), -c + g(rng)});
  }
  const auto r = mean_shift(pts, 2.0);
  ASSERT_EQ(r.modes.size(), 3u);
  for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_EQ(r.assignment[i], static_cast<int>(i % 3));
}

TEST(Emd, Examples) {
  const CostMatrix c = line_cost(2);
  EXPECT_DOUBLE_EQ(emd(std::vector<double>{0.5, 0.5}, std::vector<double>{0.5, 0.5}, c), 0.0);
  EXPECT_DOUBLE_EQ(emd(std::vector<double>{1, 0}, std::vector<double>{0, 1}, c), 1.0);
  EXPECT_DOUBLE_EQ(emd(std::vector<double>{0.5, 0.5}, std::vector<double>{0, 1}, c), 0.5);
}

TEST(Emd, MatchesTransportLpOracle) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  std::uniform_int_distribution<int> size(1, 4);
  for (int k = 0; k < 100; ++k) {
    const int m = size(rng);
    const int n = size(rng);
    const auto p = random_histogram(rng, m, k % 2);
    const auto q = random_histogram(rng, n, k % 3 == 0);
    CostMatrix c(m, std::vector<double>(n));
    for (auto& row : c)
      for (double& v : row) v = u(rng);
    ASSERT_NEAR(emd(p, q, c), oracle::transport_lp(p, q, c), 1e-9) << "case " << k;
  }
}

TEST(Emd, OnALineEqualsCdfDifference) {
  std::mt19937_64 rng(10);
  for (int k = 0; k < 50; ++k) {
    const int n = 2 + k % 7;
    const auto p = random_histogram(rng, n, true);
    const auto q = random_histogram(rng, n, false);
    double want = 0;
    double cp = 0;
    double cq = 0;
    for (int i = 0; i < n; ++i) want += std::abs((cp += p[i]) - (cq += q[i]));
    ASSERT_NEAR(emd(p, q, line_cost(n)), want, 1e-9);
  }
}

TEST(Emd, SymmetricUnderSymmetricCost) {
  std::mt19937_64 rng(12);
  for (int k = 0; k < 50; ++k) {
    const auto p = random_histogram(rng, 5, true);
    const auto q = random_histogram(rng, 5, true);
    ASSERT_NEAR(emd(p, q, line_cost(5)), emd(q, p, line_cost(5)), 1e-12);
  }
}

TEST(Emd, RejectsBadInput) {
  const CostMatrix c = line_cost(2);
  EXPECT_THROW(emd(std::vector<double>{0.5, 0.4}, std::vector<double>{0.5, 0.5}, c), UnbalancedMass);
  EXPECT_THROW(emd(std::vector<double>{1.5, -0.5}, std::vector<double>{0.5, 0.5}, c), UnbalancedMass);
  EXPECT_THROW(emd(std::vector<double>{1.0}, std::vector<double>{0.5, 0.5}, c), DimensionMismatch);
}
