#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "rqna/renewal_idc.hpp"

using namespace rqna;

TEST(IdcFromEvents, PoissonIsFlat) {
  std::mt19937_64 rng(1);
  std::exponential_distribution<double> e(2.0);
  auto sample = [&](std::mt19937_64& r) { return e(r); };
  const EventLog log = simulate_renewal(sample, rng, 1e6);
  const IdcEstimate est = idc_from_events(log, GridSpec{1e-2, 1e4, 5}.points());
  EXPECT_NEAR(est.rate, 2.0, 0.01);
  for (std::size_t k = 0; k < est.curve.values().size(); ++k) {
    EXPECT_NEAR(est.curve.values()[k], 1.0, 4.0 * est.std_errors[k] + 0.01) << est.curve.grid()[k];
  }
}

// Events on the integer lattice: a window of integer length always holds
// exactly that many events, so the IDC vanishes there.
TEST(IdcFromEvents, LatticeHasNoVarianceAtIntegerWindows) {
  EventLog log;
  log.horizon = 100000.5;
  for (int k = 0; k <= 100000; ++k) log.times.push_back(k + 0.25);
  const IdcEstimate est = idc_from_events(log, std::vector<double>{1.0, 10.0, 100.0});
  for (double v : est.curve.values()) EXPECT_NEAR(v, 0.0, 1e-12);
  // Half-integer windows hold n or n + 1 events with equal frequency.
  const IdcEstimate half = idc_from_events(log, std::vector<double>{0.5});
  EXPECT_NEAR(half.curve.values()[0], 0.25 / 0.5, 0.01);
}

TEST(IdcFromEvents, Errors) {
  EXPECT_THROW(idc_from_events(EventLog{}, std::vector<double>{1.0}), Error);
  EventLog shortlog{{0.1, 0.2, 0.3}, 1.0};
  try {
    idc_from_events(shortlog, std::vector<double>{10.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::HorizonTooShort);
  }
  const IdcEstimate est = idc_from_events(shortlog, std::vector<double>{0.01, 10.0});
  ASSERT_FALSE(est.warnings.empty());
  EventLog unsorted{{0.3, 0.1}, 1.0};
  EXPECT_THROW(unsorted.check(), Error);
}

TEST(EventLog, ReadWriteRoundTrip) {
  std::istringstream in("# horizon 5\n0.5\n\n1.25\n# note\n4\n");
  const EventLog log = EventLog::read(in);
  EXPECT_EQ(log.horizon, 5.0);
  ASSERT_EQ(log.times.size(), 3u);
  std::ostringstream out;
  log.write(out);
  std::istringstream back(out.str());
  const EventLog again = EventLog::read(back);
  EXPECT_EQ(again.times, log.times);
  EXPECT_EQ(again.horizon, log.horizon);
  std::istringstream bad("0.5\nabc\n");
  EXPECT_THROW(EventLog::read(bad), Error);
}

TEST(GeometricService, PhaseTypeAndMonteCarloAgree) {
  const std::vector<double> grid = GridSpec{1e-2, 1e3, 5}.points();
  const ServiceSpec base = make_service(Distribution::erlang(2, 1.0), grid);
  const ServiceSpec exact = idc_geometric_service(base, 0.4, grid);
  EXPECT_NEAR(exact.rate, 0.6, 1e-12);
  EXPECT_NEAR(exact.scv, 0.4 + 0.6 * 0.5, 1e-12);
  EXPECT_NEAR(exact.idc.asymptote(), exact.scv, 1e-9);

  GeometricServiceOptions mc;
  mc.prefer_monte_carlo = true;
  std::vector<std::string> warnings;
  const ServiceSpec sim = idc_geometric_service(base, 0.4, grid, mc, &warnings);
  EXPECT_EQ(sim.scv, exact.scv);
  for (double t : sim.idc.grid()) EXPECT_NEAR(sim.idc(t), exact.idc(t), 0.05) << t;
}

TEST(GeometricService, ExponentialStaysExponential) {
  const std::vector<double> grid = GridSpec{1e-2, 1e3, 5}.points();
  const ServiceSpec s = idc_geometric_service(make_service(Distribution::exponential(2.0), grid), 0.5, grid);
  EXPECT_NEAR(s.scv, 1.0, 1e-12);
  for (double v : s.idc.values()) EXPECT_NEAR(v, 1.0, 1e-8);
  const ServiceSpec same = idc_geometric_service(make_service(Distribution::exponential(2.0), grid), 0.0, grid);
  EXPECT_EQ(same.rate, 2.0);
}
