#pragma once

#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "rqna/distribution.hpp"
#include "rqna/error.hpp"
#include "rqna/feedback.hpp"
#include "rqna/idc_curve.hpp"
#include "rqna/model.hpp"
#include "rqna/phase_type.hpp"
#include "rqna/rq.hpp"
#include "rqna/simulator.hpp"

namespace rqna {

using json = nlohmann::json;

/// A parsed network file: the model plus the grid its IDCs were built on.
struct NetworkSpec {
  NetworkModel model;
  GridSpec grid;
  std::vector<std::string> names;
};

namespace detail {

[[noreturn]] inline void parse_fail(const std::string& path, const std::string& what) {
  throw Error(ErrorCode::ParseError, path + ": " + what);
}

inline const json& field(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) parse_fail(path, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) parse_fail(path + "." + key, "missing");
  return *it;
}

inline double number(const json& obj, const char* key, const std::string& path) {
  const json& v = field(obj, key, path);
  if (!v.is_number()) parse_fail(path + "." + key, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) parse_fail(path + "." + key, "expected a finite number");
  return x;
}

inline double positive(const json& obj, const char* key, const std::string& path) {
  const double x = number(obj, key, path);
  if (!(x > 0.0)) parse_fail(path + "." + key, "expected a positive number");
  return x;
}

inline std::vector<double> numbers(const json& v, const std::string& path) {
  if (!v.is_array()) parse_fail(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (!v[k].is_number()) parse_fail(path + "[" + std::to_string(k) + "]", "expected a number");
    out.push_back(v[k].get<double>());
  }
  return out;
}

inline Eigen::MatrixXd matrix(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) parse_fail(path, "expected a nonempty array of rows");
  const auto rows = static_cast<Eigen::Index>(v.size());
  Eigen::MatrixXd m;
  for (Eigen::Index r = 0; r < rows; ++r) {
    const std::string rp = path + "[" + std::to_string(r) + "]";
    const std::vector<double> row = numbers(v[static_cast<std::size_t>(r)], rp);
    if (r == 0) m.resize(rows, static_cast<Eigen::Index>(row.size()));
    if (static_cast<Eigen::Index>(row.size()) != m.cols()) parse_fail(rp, "row length differs from the first row");
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = row[static_cast<std::size_t>(c)];
  }
  return m;
}

inline IdcCurve curve_from_json(const json& v, const std::string& path) {
  if (!v.is_object()) parse_fail(path, "expected {grid, values, asymptote}");
  std::vector<double> grid = numbers(field(v, "grid", path), path + ".grid");
  std::vector<double> values = numbers(field(v, "values", path), path + ".values");
  const double asymptote = number(v, "asymptote", path);
  const double at_zero = v.contains("value_at_zero") ? number(v, "value_at_zero", path) : 1.0;
  try {
    return IdcCurve(std::move(grid), std::move(values), asymptote, at_zero);
  } catch (const Error& e) {
    parse_fail(path, e.what());
  }
}

inline json curve_to_json(const IdcCurve& c) {
  return {{"grid", c.grid()}, {"values", c.values()}, {"asymptote", c.asymptote()}, {"value_at_zero", c.value_at_zero()}};
}

inline Distribution dist_from_json(const json& v, const std::string& path) {
  const json& tag = field(v, "dist", path);
  if (!tag.is_string()) parse_fail(path + ".dist", "expected a string");
  const std::string name = tag.get<std::string>();
  try {
    if (name == "poisson" || name == "exponential") return Distribution::exponential(positive(v, "rate", path));
    if (name == "erlang") {
      const json& k = field(v, "k", path);
      if (!k.is_number_integer() || k.get<long>() < 1) parse_fail(path + ".k", "expected a positive integer");
      return Distribution::erlang(k.get<int>(), positive(v, "rate", path));
    }
    if (name == "hyperexp2") return Distribution::hyperexponential2(positive(v, "rate", path), number(v, "scv", path));
    if (name == "deterministic") return Distribution::deterministic(positive(v, "rate", path));
    if (name == "fit") return Distribution::fit(positive(v, "rate", path), number(v, "scv", path));
    if (name == "phase-type") {
      Eigen::MatrixXd a = matrix(json::array({field(v, "alpha", path)}), path + ".alpha");
      Eigen::MatrixXd t = matrix(field(v, "generator", path), path + ".generator");
      return Distribution::phase_type(PhaseTypeRenewal(a.row(0).transpose(), t));
    }
    if (name == "empirical") return Distribution::empirical(positive(v, "rate", path), number(v, "scv", path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ParseError) throw;
    parse_fail(path, e.what());
  }
  throw Error(ErrorCode::UnknownDistributionTag, path + ".dist: unknown distribution '" + name + "'");
}

inline json dist_to_json(const Distribution& d) {
  json out;
  switch (d.kind()) {
    case DistKind::Exponential: out = {{"dist", "exponential"}, {"rate", d.rate()}}; break;
    case DistKind::Erlang: out = {{"dist", "erlang"}, {"k", d.shape()}, {"rate", d.rate()}}; break;
    case DistKind::HyperExponential2: out = {{"dist", "hyperexp2"}, {"rate", d.rate()}, {"scv", d.scv()}}; break;
    case DistKind::Deterministic: out = {{"dist", "deterministic"}, {"rate", d.rate()}}; break;
    case DistKind::Empirical: out = {{"dist", "empirical"}, {"rate", d.rate()}, {"scv", d.scv()}}; break;
    case DistKind::PhaseType: {
      const PhaseTypeRenewal& ph = *d.explicit_phase_type();
      json gen = json::array();
      for (Eigen::Index r = 0; r < ph.generator().rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < ph.generator().cols(); ++c) row.push_back(ph.generator()(r, c));
        gen.push_back(row);
      }
      json alpha = json::array();
      for (Eigen::Index r = 0; r < ph.alpha().size(); ++r) alpha.push_back(ph.alpha()[r]);
      out = {{"dist", "phase-type"}, {"alpha", alpha}, {"generator", gen}};
      break;
    }
  }
  return out;
}

inline ServiceSpec service_from_json(const json& v, const std::string& path, std::span<const double> grid) {
  if (!v.is_object()) parse_fail(path, "expected an object");
  if (!v.contains("dist")) {
    // Moments only: an explicit IDC makes the service empirical, otherwise fit a distribution.
    const double rate = positive(v, "rate", path);
    const double scv = number(v, "scv", path);
    if (scv < 0.0) parse_fail(path + ".scv", "expected a nonnegative number");
    if (!v.contains("idc")) return make_service(Distribution::fit(rate, scv), grid);
    return {rate, scv, curve_from_json(v["idc"], path + ".idc"), Distribution::empirical(rate, scv)};
  }
  const Distribution d = dist_from_json(v, path);
  if (d.kind() == DistKind::Empirical) {
    return {d.rate(), d.scv(), curve_from_json(field(v, "idc", path), path + ".idc"), d};
  }
  return make_service(d, grid);
}

inline ArrivalSpec arrival_from_json(const json& v, const std::string& path, std::span<const double> grid) {
  if (!v.is_object()) parse_fail(path, "expected an object");
  if (!v.contains("dist")) {
    const double rate = positive(v, "rate", path);
    if (!v.contains("idc")) return make_arrival(Distribution::exponential(rate), grid);
    const IdcCurve c = curve_from_json(v["idc"], path + ".idc");
    return {rate, c, Distribution::empirical(rate, c.asymptote())};
  }
  const Distribution d = dist_from_json(v, path);
  if (d.kind() == DistKind::Empirical) return {d.rate(), curve_from_json(field(v, "idc", path), path + ".idc"), d};
  return make_arrival(d, grid);
}

}  // namespace detail

/// Builds a model from the network-spec JSON. `grid` overrides the grid
/// given in the file, if any.
inline NetworkSpec network_from_json(const json& doc, std::optional<GridSpec> grid = std::nullopt) {
  if (!doc.is_object()) detail::parse_fail("$", "expected an object");
  NetworkSpec spec;
  if (grid) {
    spec.grid = *grid;
  } else if (doc.contains("grid")) {
    const json& g = doc["grid"];
    spec.grid.lo = detail::positive(g, "lo", "grid");
    spec.grid.hi = detail::positive(g, "hi", "grid");
    if (g.contains("points_per_decade")) {
      const json& p = g["points_per_decade"];
      if (!p.is_number_integer() || p.get<int>() < 1) detail::parse_fail("grid.points_per_decade", "expected a positive integer");
      spec.grid.points_per_decade = p.get<int>();
    }
    if (!(spec.grid.hi > spec.grid.lo)) detail::parse_fail("grid", "hi must exceed lo");
  }
  const std::vector<double> points = spec.grid.points();

  const json& stations = detail::field(doc, "stations", "$");
  if (!stations.is_array() || stations.empty()) detail::parse_fail("stations", "expected a nonempty array");
  const auto k = static_cast<Eigen::Index>(stations.size());
  for (std::size_t i = 0; i < stations.size(); ++i) {
    const std::string path = "stations[" + std::to_string(i) + "]";
    const json& s = stations[i];
    if (!s.is_object()) detail::parse_fail(path, "expected an object");
    spec.names.push_back(s.contains("name") && s["name"].is_string() ? s["name"].get<std::string>()
                                                                       : std::to_string(i + 1));
    spec.model.services.push_back(detail::service_from_json(detail::field(s, "service", path), path + ".service", points));
    if (s.contains("arrival") && !s["arrival"].is_null()) {
      spec.model.arrivals.push_back(detail::arrival_from_json(s["arrival"], path + ".arrival", points));
    } else {
      spec.model.arrivals.push_back(no_arrivals(points));
    }
  }
  spec.model.routing = detail::matrix(detail::field(doc, "routing", "$"), "routing");
  if (spec.model.routing.rows() != k || spec.model.routing.cols() != k) {
    detail::parse_fail("routing", "expected a " + std::to_string(k) + "x" + std::to_string(k) + " matrix");
  }
  return spec;
}

inline NetworkSpec read_network(std::istream& in, std::optional<GridSpec> grid = std::nullopt) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, std::string("malformed JSON: ") + e.what());
  }
  return network_from_json(doc, grid);
}

inline json network_to_json(const NetworkSpec& spec) {
  const NetworkModel& m = spec.model;
  json doc;
  doc["grid"] = {{"lo", spec.grid.lo}, {"hi", spec.grid.hi}, {"points_per_decade", spec.grid.points_per_decade}};
  json stations = json::array();
  for (int i = 0; i < m.stations(); ++i) {
    const auto is = static_cast<std::size_t>(i);
    json s;
    if (is < spec.names.size()) s["name"] = spec.names[is];
    const ServiceSpec& svc = m.services[is];
    if (svc.dist) {
      s["service"] = detail::dist_to_json(*svc.dist);
      if (svc.dist->kind() == DistKind::Empirical) s["service"]["idc"] = detail::curve_to_json(svc.idc);
    } else {
      s["service"] = {{"rate", svc.rate}, {"scv", svc.scv}, {"idc", detail::curve_to_json(svc.idc)}};
    }
    const ArrivalSpec& a = m.arrivals[is];
    if (a.rate > 0.0) {
      if (a.dist) {
        s["arrival"] = detail::dist_to_json(*a.dist);
        if (a.dist->kind() == DistKind::Empirical) s["arrival"]["idc"] = detail::curve_to_json(a.idc);
      } else {
        s["arrival"] = {{"rate", a.rate}, {"idc", detail::curve_to_json(a.idc)}};
      }
    }
    stations.push_back(s);
  }
  doc["stations"] = stations;
  json routing = json::array();
  for (Eigen::Index r = 0; r < m.routing.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.routing.cols(); ++c) row.push_back(m.routing(r, c));
    routing.push_back(row);
  }
  doc["routing"] = routing;
  return doc;
}

namespace detail {

inline json vector_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

inline json interval_json(const Interval& ci) {
  return {{"mean", ci.mean}, {"half_width", std::isfinite(ci.half_width) ? json(ci.half_width) : json(nullptr)}};
}

}  // namespace detail

inline json plan_to_json(const EliminationPlan& plan) {
  json out = json::array();
  for (const StationElimination& e : plan.stations) {
    json flows = json::array();
    for (const auto& [u, v] : e.eliminated_flows) flows.push_back({u + 1, v + 1});
    json passable = json::array();
    for (int u : e.passable) passable.push_back(u + 1);
    const ServiceSpec& mod = e.reduced.services[static_cast<std::size_t>(e.station)];
    out.push_back({{"station", e.station + 1},
                   {"p_hat", e.p_hat},
                   {"passable", passable},
                   {"eliminated_flows", flows},
                   {"modified_service", {{"rate", mod.rate}, {"scv", mod.scv}}},
                   {"warnings", e.warnings}});
  }
  return out;
}

inline json report_to_json(const NetworkPerformance& perf, const GridSpec& grid) {
  json stations = json::array();
  for (std::size_t i = 0; i < perf.stations.size(); ++i) {
    const StationPerformance& s = perf.stations[i];
    stations.push_back({{"station", i + 1},
                        {"lambda", s.lambda},
                        {"rho", s.rho},
                        {"Z", s.z},
                        {"W", s.w},
                        {"Q", s.q},
                        {"X", s.x},
                        {"sojourn", s.sojourn},
                        {"eliminated", s.eliminated},
                        {"p_hat", s.p_hat},
                        {"argmax", s.argmax}});
  }
  const VariabilityParams& vp = perf.flows.params;
  return {{"stations", stations},
          {"totals", {{"total", perf.total}, {"by_entry_station", detail::vector_json(perf.total_by_entry)}}},
          {"diagnostics",
           {{"elimination", plan_to_json(perf.plan)},
            {"grid", {{"lo", grid.lo}, {"hi", grid.hi}, {"points_per_decade", grid.points_per_decade}}},
            {"residuals", {{"max_residual", perf.flows.max_residual}, {"min_rcond", perf.flows.min_rcond}}},
            {"variability", {{"ca2", detail::vector_json(vp.ca2)}, {"cd2", detail::vector_json(vp.cd2)}}},
            {"warnings", perf.warnings}}}};
}

inline json flows_summary_json(const FlowSolution& flows) {
  json c2 = json::array();
  const int k = flows.rates.stations();
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      if (flows.rates.active_flow(i, j)) c2.push_back({{"from", i + 1}, {"to", j + 1}, {"c2", flows.params.ca2_flow(i, j)}});
    }
  }
  return {{"lambda", detail::vector_json(flows.rates.lambda)},
          {"rho", detail::vector_json(flows.rates.rho)},
          {"ca2", detail::vector_json(flows.params.ca2)},
          {"cd2", detail::vector_json(flows.params.cd2)},
          {"flow_c2", c2}};
}

inline json sim_to_json(const SimEstimate& est) {
  json stations = json::array();
  for (std::size_t i = 0; i < est.stations.size(); ++i) {
    const StationEstimate& s = est.stations[i];
    stations.push_back({{"station", i + 1},
                        {"lambda", detail::interval_json(s.lambda)},
                        {"W", detail::interval_json(s.waiting)},
                        {"sojourn", detail::interval_json(s.sojourn)},
                        {"Z", detail::interval_json(s.workload)},
                        {"Q", detail::interval_json(s.queue)},
                        {"X", detail::interval_json(s.in_system)}});
  }
  json entry = json::array();
  for (const auto& t : est.total_by_entry) entry.push_back(t ? detail::interval_json(*t) : json(nullptr));
  return {{"stations", stations},
          {"totals", {{"total", detail::interval_json(est.total)}, {"by_entry_station", entry}}},
          {"run",
           {{"horizon", est.horizon}, {"warmup_time", est.warmup_time}, {"replications", est.replications}}}};
}

}  // namespace rqna
