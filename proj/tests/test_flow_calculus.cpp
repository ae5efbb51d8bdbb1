#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace rqna;
using namespace rqna::testing;

TEST(TrafficRates, ThreeStationExample) {
  const RateSolution r = solve_traffic_rates(three_station("D1").model);
  EXPECT_NEAR(r.lambda[0], 0.675, 1e-12);
  EXPECT_NEAR(r.lambda[1], 0.9, 1e-12);
  EXPECT_NEAR(r.lambda[2], 0.45, 1e-12);
  EXPECT_NEAR(r.rho[1], 0.9, 1e-12);
  EXPECT_NEAR(r.visits(0, 1), 4.0, 1e-12);
  EXPECT_LT(r.residual, 1e-12);
}

TEST(TrafficRates, UnstableStationsAreReported) {
  NetworkModel m = three_station("D1").model;
  m.services[1] = make_service(Distribution::exponential(0.8), GridSpec{}.points());
  try {
    solve_traffic_rates(m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Unstable);
    EXPECT_NE(std::string(e.what()).find('2'), std::string::npos);
  }
}

TEST(DepartureIdc, InterpolatesBetweenServiceAndArrival) {
  const std::vector<double> grid = GridSpec{}.points();
  const NetworkModel m = single_station(Distribution::hyperexponential2(0.8, 4.0), Distribution::erlang(4, 1.0), grid);
  const FlowSolution f = solve_flows(m, grid);
  const IdcCurve& d = f.departure[0];
  EXPECT_NEAR(d.values().front(), m.services[0].idc(0.8 * grid.front()), 1e-3);
  EXPECT_NEAR(d.values().back(), 4.0, 1e-3);
  EXPECT_NEAR(d.asymptote(), 4.0, 1e-12);
  EXPECT_NEAR(f.params.cd2[0], 4.0, 1e-12);
}

TEST(Splitting, CorrectionForms) {
  const RateSolution r = solve_traffic_rates(three_station("D1").model);
  // 3 -> 2: the alternative is leaving, so both forms agree.
  EXPECT_NEAR(splitting_alpha_limit(2, 1, r), 1.0, 1e-12);
  EXPECT_NEAR(splitting_alpha_limit(2, 1, r, SplittingCorrection::Covariance), 1.0, 1e-12);
  EXPECT_NEAR(splitting_alpha_limit(1, 0, r), 2.0, 1e-12);
  EXPECT_NEAR(splitting_alpha_limit(1, 2, r, SplittingCorrection::Covariance), -1.0, 1e-12);
  EXPECT_EQ(splitting_alpha(2, 1, r, 1.0, 0.0), 0.0);
}

TEST(Zeta, SymmetricPerStation) {
  for (const char* id : {"A1", "D2", "E4"}) {
    const NetworkModel m = three_station(id).model;
    const ZetaTensor z = zeta_tensor(m, solve_traffic_rates(m));
    for (const auto& s : z.by_station) EXPECT_LT((s - s.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  }
  const NetworkModel ten = load_network("ten_station.json").model;
  const ZetaTensor z = zeta_tensor(ten, solve_traffic_rates(ten));
  for (const auto& s : z.by_station) EXPECT_LT((s - s.transpose()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(IdcSystem, JacksonNetworksStayPoisson) {
  std::mt19937_64 rng(21);
  const std::vector<double> grid = GridSpec{}.points();
  for (int n = 0; n < 10; ++n) {
    const NetworkModel m = random_jackson_feedforward(rng, 2 + n % 6, grid);
    const FlowSolution f = solve_flows(m, grid);
    for (int i = 0; i < m.stations(); ++i) {
      for (double v : f.arrival[static_cast<std::size_t>(i)].values()) ASSERT_NEAR(v, 1.0, 1e-8);
      for (double v : f.departure[static_cast<std::size_t>(i)].values()) ASSERT_NEAR(v, 1.0, 1e-8);
    }
  }
}

TEST(IdcSystem, ReducedSolveMatchesDense) {
  const NetworkModel m = load_network("ten_station.json").model;
  const std::vector<double> grid = GridSpec{1e-3, 1e5, 10}.points();
  const FlowSolution dense = solve_flows(m, grid);
  SolverOptions opt;
  opt.force_reduced = true;
  const FlowSolution reduced = solve_flows(m, grid, opt);
  for (int i = 0; i < m.stations(); ++i) {
    for (std::size_t g = 0; g < grid.size(); ++g) {
      EXPECT_NEAR(dense.arrival[static_cast<std::size_t>(i)].values()[g],
                  reduced.arrival[static_cast<std::size_t>(i)].values()[g], 1e-9);
    }
  }
  EXPECT_LT(dense.max_residual, 1e-9);
}

TEST(IdcSystem, LimitsMatchLargeTimeValues) {
  const NetworkModel m = three_station("E2").model;
  const std::vector<double> grid = GridSpec{}.points();
  const FlowSolution f = solve_flows(m, grid);
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(f.arrival[static_cast<std::size_t>(i)].values().back(), f.params.ca2[i], 1e-2 * f.params.ca2[i]);
  }
}

TEST(TreeSolver, AgreesWithGeneralSolver) {
  std::mt19937_64 rng(31);
  const std::vector<double> grid = GridSpec{1e-3, 1e6, 10}.points();
  for (int n = 0; n < 10; ++n) {
    const NetworkModel m = random_tree(rng, 3 + n % 5, grid);
    const RateSolution r = solve_traffic_rates(m);
    const ZetaTensor z = zeta_tensor(m, r);
    const FlowSolution general = assemble_and_solve_idc(m, r, solve_limiting_variability(m, r, z), z, grid);
    const FlowSolution tree = tree_rqna(m, r, grid);
    for (int i = 0; i < m.stations(); ++i) {
      for (std::size_t g = 0; g < grid.size(); ++g) {
        EXPECT_NEAR(general.arrival[static_cast<std::size_t>(i)].values()[g],
                    tree.arrival[static_cast<std::size_t>(i)].values()[g], 1e-10);
      }
    }
  }
}

TEST(TreeSolver, RejectsCycles) {
  EXPECT_THROW(tree_order(three_station("A1").model.routing), Error);
  Eigen::MatrixXd diamond = Eigen::MatrixXd::Zero(4, 4);
  diamond(0, 1) = diamond(0, 2) = 0.5;
  diamond(1, 3) = diamond(2, 3) = 1.0;
  EXPECT_THROW(tree_order(diamond), Error);
}
