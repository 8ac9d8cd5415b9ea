#include <cmath>

#include <gtest/gtest.h>

#include "curvetransfer/error.hpp"
#include "curvetransfer/metrics.hpp"

namespace m = curvetransfer::metrics;
using V = std::vector<double>;

TEST(Mape, TenPercentEach) {
  const auto r = m::mape(V{100, 200}, V{110, 180});
  EXPECT_DOUBLE_EQ(r.percent, 10.0);
  EXPECT_EQ(r.n_used, 2u);
  EXPECT_EQ(r.n_excluded, 0u);
}

TEST(Mape, PerfectPredictionIsZero) {
  EXPECT_EQ(m::mape(V{1, 2, 3}, V{1, 2, 3}).percent, 0.0);
}

TEST(Mape, ZeroActualIsExcluded) {
  const auto r = m::mape(V{0, 100}, V{5, 100}, 1e-6);
  EXPECT_EQ(r.percent, 0.0);
  EXPECT_EQ(r.n_excluded, 1u);
  EXPECT_EQ(r.n_used, 1u);
}

TEST(Mape, AllExcludedIsAnError) {
  EXPECT_THROW(m::mape(V{0, 0}, V{1, 1}), curvetransfer::DataError);
}

TEST(Mape, LengthMismatchIsAnError) {
  EXPECT_THROW(m::mape(V{1, 2}, V{1}), curvetransfer::DataError);
}

TEST(Rmse, Examples) {
  EXPECT_DOUBLE_EQ(m::rmse(V{0, 0}, V{3, 4}), std::sqrt(12.5));
  EXPECT_NEAR(m::rmse(V{0, 0}, V{3, 4}), 3.5355, 1e-4);
  EXPECT_EQ(m::rmse(V{1, 2}, V{1, 2}), 0.0);
  EXPECT_EQ(m::rmse(V{1}, V{3}), 2.0);
}

TEST(R2, Examples) {
  EXPECT_EQ(m::r2(V{1, 2, 3}, V{1, 2, 3}), 1.0);
  EXPECT_EQ(m::r2(V{1, 2, 3}, V{2, 2, 2}), 0.0);
  EXPECT_DOUBLE_EQ(m::r2(V{1, 2, 3}, V{3, 2, 1}), -3.0);
}

TEST(R2, ConstantActualIsAnError) {
  EXPECT_THROW(m::r2(V{2, 2, 2}, V{1, 2, 3}), curvetransfer::DataError);
}

TEST(Pearson, PerfectLinearRelations) {
  const V xs{0.5, 1.0, 2.0, 4.5};
  V up, down;
  for (double x : xs) {
    up.push_back(2 * x + 1);
    down.push_back(-x);
  }
  EXPECT_NEAR(m::pearson(xs, up), 1.0, 1e-15);
  EXPECT_NEAR(m::pearson(xs, down), -1.0, 1e-15);
}

TEST(Pearson, ZeroVarianceIsAnError) {
  EXPECT_THROW(m::pearson(V{1, 2, 3}, V{5, 5, 5}), curvetransfer::DataError);
}

TEST(Pearson, PublishedDistanceErrorRow) {
  // AlSi10Mg dataset 1: DTW distances and MAPEs for (Nylon, PLA, CF-ABS, Resin).
  const V dtw{0.173, 0.100, 0.097, 0.085};
  const V mape{42.07, 9.80, 9.49, 7.01};
  EXPECT_NEAR(m::pearson(dtw, mape), 0.996, 0.001);
}

TEST(Pearson, StaysInRange) {
  const V xs{1e-9, 2e-9, 3e-9};
  const V ys{1e9, 2e9, 3e9};
  const double r = m::pearson(xs, ys);
  EXPECT_LE(r, 1.0);
  EXPECT_GE(r, -1.0);
}

TEST(Summarize, CombinesAllMetrics) {
  const auto s = m::summarize(V{100, 200, 300}, V{110, 180, 300});
  EXPECT_DOUBLE_EQ(s.mape, 20.0 / 3.0);
  EXPECT_DOUBLE_EQ(s.rmse, std::sqrt(500.0 / 3.0));
  EXPECT_DOUBLE_EQ(s.r2, 1.0 - 500.0 / 20000.0);
  EXPECT_EQ(s.n_points, 3u);
  EXPECT_EQ(s.n_excluded, 0u);
}
