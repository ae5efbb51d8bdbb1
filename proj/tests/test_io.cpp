#include <sstream>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace rqna;
using namespace rqna::testing;

namespace {

ErrorCode parse_code(const std::string& text, std::string* message = nullptr) {
  std::istringstream in(text);
  try {
    read_network(in);
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.code();
  }
  ADD_FAILURE() << "parsed without error";
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST(NetworkJson, ReadsBundledNetwork) {
  const NetworkSpec s = three_station("D1");
  ASSERT_EQ(s.model.stations(), 3);
  EXPECT_EQ(s.names[1], "2");
  EXPECT_DOUBLE_EQ(s.model.arrivals[0].rate, 0.225);
  EXPECT_DOUBLE_EQ(s.model.services[1].scv, 2.25);
  EXPECT_DOUBLE_EQ(s.model.routing(1, 2), 0.5);
  EXPECT_EQ(s.model.arrivals[1].rate, 0.0);
}

TEST(NetworkJson, DumpRoundTrip) {
  for (const char* file : {"three_station_E3.json", "ten_station.json"}) {
    const NetworkSpec a = load_network(file);
    const NetworkSpec b = network_from_json(json::parse(network_to_json(a).dump()));
    ASSERT_EQ(a.model.stations(), b.model.stations());
    EXPECT_EQ(a.names, b.names);
    EXPECT_EQ(a.grid, b.grid);
    EXPECT_LT((a.model.routing - b.model.routing).cwiseAbs().maxCoeff(), 1e-15);
    for (int i = 0; i < a.model.stations(); ++i) {
      const auto& sa = a.model.services[static_cast<std::size_t>(i)];
      const auto& sb = b.model.services[static_cast<std::size_t>(i)];
      EXPECT_DOUBLE_EQ(sa.rate, sb.rate);
      EXPECT_NEAR(sa.scv, sb.scv, 1e-12);
      EXPECT_NEAR(sa.idc.values().back(), sb.idc.values().back(), 1e-9);
    }
    EXPECT_NEAR(analyze(a.model).total, analyze(b.model).total, 1e-9);
  }
}

TEST(NetworkJson, DistributionTags) {
  const json doc = json::parse(R"({
    "stations": [
      {"service": {"dist": "erlang", "k": 3, "rate": 2},
       "arrival": {"dist": "hyperexp2", "rate": 0.5, "scv": 3}},
      {"service": {"dist": "phase-type", "alpha": [1, 0], "generator": [[-2, 2], [0, -2]]}},
      {"service": {"dist": "deterministic", "rate": 4}},
      {"service": {"dist": "empirical", "rate": 3, "scv": 1.5,
                   "idc": {"grid": [0.1, 1, 10], "values": [1, 1.3, 1.5], "asymptote": 1.5}}}
    ],
    "routing": [[0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1], [0, 0, 0, 0]]
  })");
  const NetworkSpec s = network_from_json(doc);
  EXPECT_EQ(s.model.services[0].dist->kind(), DistKind::Erlang);
  EXPECT_NEAR(s.model.services[0].scv, 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(s.model.arrivals[0].idc.asymptote(), 3.0, 1e-9);
  EXPECT_NEAR(s.model.services[1].rate, 1.0, 1e-12);
  EXPECT_NEAR(s.model.services[1].scv, 0.5, 1e-12);
  EXPECT_EQ(s.model.services[2].scv, 0.0);
  EXPECT_EQ(s.model.services[3].dist->kind(), DistKind::Empirical);
  EXPECT_DOUBLE_EQ(s.model.services[3].idc(1.0), 1.3);
  EXPECT_NO_THROW(analyze(s.model));
}

TEST(NetworkJson, MalformedJson) { EXPECT_EQ(parse_code("{\"stations\": ["), ErrorCode::ParseError); }

TEST(NetworkJson, ErrorsNameTheField) {
  std::string msg;
  EXPECT_EQ(parse_code(R"({"stations": [{"service": {"scv": 1}}], "routing": [[0]]})", &msg), ErrorCode::ParseError);
  EXPECT_NE(msg.find("stations[0].service.rate"), std::string::npos) << msg;

  EXPECT_EQ(parse_code(R"({"stations": [{"service": {"rate": 1, "scv": 1}}], "routing": [[0, 1]]})", &msg),
            ErrorCode::ParseError);
  EXPECT_NE(msg.find("routing"), std::string::npos) << msg;

  EXPECT_EQ(parse_code(R"({"stations": [{"service": {"dist": "weibull", "rate": 1}}], "routing": [[0]]})", &msg),
            ErrorCode::UnknownDistributionTag);
  EXPECT_NE(msg.find("weibull"), std::string::npos) << msg;
}

TEST(NetworkJson, GridOverride) {
  const NetworkSpec s = three_station("A1");
  std::istringstream in(network_to_json(s).dump());
  const NetworkSpec g = read_network(in, GridSpec{1e-2, 1e4, 4});
  EXPECT_EQ(g.model.arrivals[0].idc.grid().size(), 25u);
}

TEST(ReportJson, ContainsStationsAndTotals) {
  AnalyzeOptions opt;
  opt.eliminate = true;
  const NetworkPerformance perf = analyze(three_station("D1").model, opt);
  const json r = report_to_json(perf, opt.grid);
  ASSERT_EQ(r["stations"].size(), 3u);
  EXPECT_DOUBLE_EQ(r["totals"]["total"].get<double>(), perf.total);
  EXPECT_EQ(plan_to_json(perf.plan).size(), 1u);
}

TEST(ReportJson, SimulationWithOneReplication) {
  const std::vector<double> g = GridSpec{}.points();
  SimConfig c;
  c.events = 1e4;
  c.replications = 1;
  const json j = sim_to_json(simulate(single_station(Distribution::exponential(0.5), Distribution::exponential(1.0), g), c));
  EXPECT_TRUE(j.dump().find("null") != std::string::npos);
}
