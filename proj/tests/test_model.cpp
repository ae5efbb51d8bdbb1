#include <gtest/gtest.h>

#include "support.hpp"

using namespace rqna;

namespace {

NetworkModel base(const Eigen::MatrixXd& p) {
  const std::vector<double> g = GridSpec{}.points();
  NetworkModel m;
  m.routing = p;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    m.arrivals.push_back(i == 0 ? make_arrival(Distribution::exponential(0.1), g) : no_arrivals(g));
    m.services.push_back(make_service(Distribution::exponential(1.0), g));
  }
  return m;
}

ErrorCode code_of(const NetworkModel& m) {
  try {
    validate(m);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST(Validate, RowSumAboveOne) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(2, 2);
  p(0, 1) = 0.7;
  p(0, 0) = 0.5;
  EXPECT_EQ(code_of(base(p)), ErrorCode::RowSumExceedsOne);
}

TEST(Validate, IdentityRoutingNeverLeaves) {
  EXPECT_EQ(code_of(base(Eigen::MatrixXd::Identity(2, 2))), ErrorCode::NotInvertible);
}

TEST(Validate, NoExternalArrivals) {
  NetworkModel m = base(Eigen::MatrixXd::Zero(2, 2));
  m.arrivals[0] = no_arrivals(GridSpec{}.points());
  EXPECT_EQ(code_of(m), ErrorCode::NoExternalArrivals);
}

TEST(Validate, NonpositiveServiceRate) {
  NetworkModel m = base(Eigen::MatrixXd::Zero(2, 2));
  m.services[1].rate = 0.0;
  EXPECT_EQ(code_of(m), ErrorCode::NonpositiveServiceRate);
}

TEST(Validate, ServiceAsymptoteMustMatchScv) {
  NetworkModel m = base(Eigen::MatrixXd::Zero(1, 1));
  m.services[0].scv = 2.0;
  EXPECT_THROW(validate(m), Error);
}

TEST(Validate, AcceptsBundledNetworks) {
  for (const auto& p : rqna::testing::published_totals()) EXPECT_NO_THROW(validate(rqna::testing::three_station(p.id).model));
  EXPECT_NO_THROW(validate(rqna::testing::load_network("ten_station.json").model));
}

TEST(Model, RenewalIdcOfExponentialIsConstant) {
  const IdcCurve c = renewal_idc(Distribution::exponential(2.0), GridSpec{}.points());
  for (double v : c.values()) EXPECT_EQ(v, 1.0);
}

TEST(Model, ErlangTwoAsymptote) {
  const IdcCurve c = renewal_idc(Distribution::erlang(2, 1.0), GridSpec{}.points());
  EXPECT_NEAR(c(1e8), 0.5, 1e-12);
  EXPECT_NEAR(c.values().back(), 0.5, 1e-6);
}
