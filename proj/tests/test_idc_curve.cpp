#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "rqna/idc_curve.hpp"

using namespace rqna;

TEST(IdcCurve, ConstantCurve) {
  const IdcCurve c = IdcCurve::constant(1.0, GridSpec{}.points());
  EXPECT_DOUBLE_EQ(c(17.3), 1.0);
  EXPECT_DOUBLE_EQ(evaluate(c, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(evaluate(c, 1e12), 1.0);
}

TEST(IdcCurve, EvaluationRules) {
  const IdcCurve c({1.0, 10.0, 100.0}, {2.0, 4.0, 6.0}, 7.0, 1.0);
  EXPECT_DOUBLE_EQ(c(0.5), 1.0);   // value at zero below the grid
  EXPECT_DOUBLE_EQ(c(1.0), 1.0);
  EXPECT_DOUBLE_EQ(c(10.0), 4.0);
  EXPECT_NEAR(c(std::sqrt(10.0)), 3.0, 1e-12);  // log-linear
  EXPECT_DOUBLE_EQ(c(100.0), 7.0);  // asymptote from the last grid point on
  EXPECT_DOUBLE_EQ(c(1e9), 7.0);
}

TEST(IdcCurve, RejectsBadInput) {
  EXPECT_THROW(IdcCurve({1.0, 1.0}, {1.0, 1.0}, 1.0), Error);
  EXPECT_THROW(IdcCurve({1.0, 2.0}, {1.0, -1.0}, 1.0), Error);
  EXPECT_THROW(IdcCurve({1.0, 2.0}, {1.0}, 1.0), Error);
  EXPECT_THROW(time_scale(IdcCurve::constant(1.0, {1.0, 2.0}), 0.0), Error);
}

TEST(IdcCurve, TimeScale) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  const std::vector<double> grid = GridSpec{1e-2, 1e3, 10}.points();
  std::vector<double> values;
  for (std::size_t k = 0; k < grid.size(); ++k) values.push_back(u(rng));
  const IdcCurve c(grid, values, 0.7, 1.0);
  EXPECT_EQ(time_scale(c, 1.0).values(), c.values());
  const IdcCurve s = time_scale(c, 0.9);
  for (double t = 1e-3; t < 1e4; t *= 1.3) EXPECT_NEAR(s(t), c(0.9 * t), 1e-12) << t;
  const IdcCurve twice = time_scale(time_scale(c, 0.5), 3.0);
  const IdcCurve once = time_scale(c, 1.5);
  for (double t : once.grid()) EXPECT_NEAR(twice(t), once(t), 1e-12);
  EXPECT_DOUBLE_EQ(s.asymptote(), 0.7);
}

TEST(IdcCurve, EvaluationStaysInRange) {
  const IdcCurve c({1.0, 2.0, 4.0}, {0.5, 3.0, 1.0}, 2.0, 1.0);
  for (double t = 0.0; t < 10.0; t += 0.01) {
    EXPECT_GE(c(t), 0.5);
    EXPECT_LE(c(t), 3.0);
  }
}

TEST(IdcCurve, GridAndCsv) {
  const std::vector<double> g = GridSpec{}.points();
  EXPECT_EQ(g.size(), 251u);
  EXPECT_DOUBLE_EQ(g.front(), 1e-3);
  EXPECT_NEAR(g.back(), 1e7, 1e-3);
  std::ostringstream os;
  write_csv(os, IdcCurve::constant(1.0, {1.0, 2.0}));
  EXPECT_EQ(os.str(), "t,value\n1,1\n2,1\n");
}
