#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/tools/minima.hpp>
#include <Eigen/Dense>

#include "rqna/error.hpp"
#include "rqna/feedback.hpp"
#include "rqna/flow_calculus.hpp"
#include "rqna/idc_curve.hpp"
#include "rqna/model.hpp"

namespace rqna {

inline constexpr double kDefaultRqConstant = std::numbers::sqrt2;

struct RqInput {
  double lambda = 0.0;
  IdcCurve idc;
  double mu = 1.0;
  double cs2 = 1.0;
  double b = kDefaultRqConstant;
};

struct RqResult {
  double workload = 0.0;  // Z*
  double argmax = 0.0;    // maximising x
  std::vector<std::string> warnings;
};

struct RqSearch {
  double lo = 1e-3;
  double hi = 1e7;
  int points_per_decade = 25;
};

namespace detail {

inline double rq_objective(const RqInput& in, double x) {
  const double rho = in.lambda / in.mu;
  if (x <= 0.0) return 0.0;
  const double idw = std::max(in.idc(x) + in.cs2, 0.0);
  return -(1.0 - rho) * x + in.b * std::sqrt(rho * x * idw / in.mu);
}

}  // namespace detail

/// Z* = sup_{x >= 0} { -(1 - rho) x + b sqrt(rho x (I_a(x) + c_s^2) / mu) }:
/// a scan over a log grid, then a Brent refinement inside the bracket of
/// the best grid point.
inline RqResult rq_workload_detail(const RqInput& in, const RqSearch& search = {}) {
  const double rho = in.lambda / in.mu;
  if (!(rho > 0.0) || !(rho < 1.0)) throw Error(ErrorCode::InvalidArgument, "RQ needs 0 < rho < 1");
  if (!(in.cs2 >= 0.0) || !(in.b > 0.0)) throw Error(ErrorCode::InvalidArgument, "RQ needs c_s^2 >= 0 and b > 0");
  RqResult out;

  const double cx2 = std::max(in.idc.asymptote() + in.cs2, 1e-3);
  const double lo = std::min(search.lo, 1e-4 * std::min(1.0 / in.lambda, 1.0 / in.mu));
  double hi = std::max(search.hi, 100.0 * rho * cx2 / ((1.0 - rho) * (1.0 - rho) * in.lambda));

  for (int attempt = 0; attempt < 2; ++attempt) {
    const std::vector<double> xs = GridSpec{lo, hi, search.points_per_decade}.points();
    std::size_t best = 0;
    double best_f = detail::rq_objective(in, xs[0]);
    for (std::size_t k = 1; k < xs.size(); ++k) {
      const double f = detail::rq_objective(in, xs[k]);
      if (f > best_f) {
        best_f = f;
        best = k;
      }
    }
    if (best + 1 == xs.size() && attempt == 0) {
      hi *= 100.0;
      continue;
    }
    if (best + 1 == xs.size()) {
      out.warnings.push_back("GridTooSmall: RQ maximiser at the grid boundary x = " + std::to_string(xs.back()));
    }
    const double a = best == 0 ? 0.0 : xs[best - 1];
    const double b = best + 1 < xs.size() ? xs[best + 1] : xs[best];
    double arg = xs[best];
    if (b > a) {
      std::uintmax_t iters = 200;
      const auto r = boost::math::tools::brent_find_minima([&](double x) { return -detail::rq_objective(in, x); }, a, b,
                                                           std::numeric_limits<double>::digits / 2, iters);
      if (-r.second > best_f) {
        best_f = -r.second;
        arg = r.first;
      }
    }
    out.workload = std::max(0.0, best_f);
    out.argmax = out.workload > 0.0 ? arg : 0.0;
    break;
  }
  return out;
}

inline double rq_workload(const RqInput& in, const RqSearch& search = {}) { return rq_workload_detail(in, search).workload; }

/// E[W] ~ max{0, Z/rho - (c_s^2 + 1) / (2 mu)}.
inline double waiting_from_workload(double z, double lambda, double mu, double cs2) {
  const double rho = lambda / mu;
  if (!(rho > 0.0) || !(rho < 1.0)) throw Error(ErrorCode::InvalidArgument, "waiting time needs 0 < rho < 1");
  return std::max(0.0, z / rho - (cs2 + 1.0) / (2.0 * mu));
}

struct QueueMetrics {
  double q = 0.0;  // mean number waiting
  double x = 0.0;  // mean number in system
};

inline QueueMetrics queue_metrics(double w, double lambda, double rho) { return {lambda * w, lambda * w + rho}; }

/// E[T_i] = sum_j xi_ij (W_j + 1/mu_j) for each entry station i.
inline Eigen::VectorXd total_sojourn(const Eigen::VectorXd& waiting, const NetworkModel& model,
                                     const RateSolution& rates) {
  const int k = model.stations();
  Eigen::VectorXd per_visit(k);
  for (int j = 0; j < k; ++j) per_visit[j] = waiting[j] + 1.0 / model.services[j].rate;
  return rates.visits * per_visit;
}

struct StationPerformance {
  double lambda = 0.0;
  double rho = 0.0;
  double z = 0.0;        // mean workload
  double w = 0.0;        // mean waiting time per visit
  double q = 0.0;
  double x = 0.0;
  double sojourn = 0.0;  // per visit, w + 1/mu
  bool eliminated = false;
  double p_hat = 0.0;
  double argmax = 0.0;
};

struct NetworkPerformance {
  std::vector<StationPerformance> stations;
  Eigen::VectorXd total_by_entry;  // E[T_i]
  double total = 0.0;              // averaged over entry stations by external rate
  FlowSolution flows;
  EliminationPlan plan;
  std::vector<std::string> warnings;
};

struct AnalyzeOptions {
  bool eliminate = false;
  double b = kDefaultRqConstant;
  GridSpec grid{};
  SolverOptions solver{};
  GeometricServiceOptions geometric{};
};

/// Rates, limiting variability, IDC systems, optional near-immediate feedback
/// elimination, the RQ supremum and the conversions to W, Q, X and sojourn.
inline NetworkPerformance analyze(const NetworkModel& model, const AnalyzeOptions& opt = {}) {
  validate(model);
  const std::vector<double> grid = opt.grid.points();
  const RqSearch search{opt.grid.lo, opt.grid.hi, opt.grid.points_per_decade};
  NetworkPerformance out;
  out.flows = solve_flows(model, grid, opt.solver);
  const RateSolution& rates = out.flows.rates;
  out.warnings = out.flows.warnings;
  if (opt.eliminate) out.plan = build_elimination_plan(model, rates, grid, opt.geometric);

  const int k = model.stations();
  Eigen::VectorXd waiting = Eigen::VectorXd::Zero(k);
  for (int i = 0; i < k; ++i) {
    StationPerformance s;
    s.lambda = rates.lambda[i];
    s.rho = rates.rho[i];
    const ServiceSpec& svc = model.services[i];
    if (s.lambda > 0.0) {
      if (const StationElimination* e = out.plan.find(i)) {
        const FlowSolution reduced = solve_flows(e->reduced, grid, opt.solver);
        const ServiceSpec& mod = e->reduced.services[i];
        const double lam = reduced.rates.lambda[i];
        const RqResult r = rq_workload_detail({lam, reduced.arrival[i], mod.rate, mod.scv, opt.b}, search);
        s.z = r.workload;
        s.argmax = r.argmax;
        s.w = adjusted_waiting(waiting_from_workload(r.workload, lam, mod.rate, mod.scv), e->p_hat);
        s.eliminated = true;
        s.p_hat = e->p_hat;
        for (const auto& msg : r.warnings) out.warnings.push_back("station " + std::to_string(i + 1) + ": " + msg);
        for (const auto& msg : e->warnings) out.warnings.push_back("station " + std::to_string(i + 1) + ": " + msg);
      } else {
        const RqResult r = rq_workload_detail({s.lambda, out.flows.arrival[i], svc.rate, svc.scv, opt.b}, search);
        s.z = r.workload;
        s.argmax = r.argmax;
        s.w = waiting_from_workload(r.workload, s.lambda, svc.rate, svc.scv);
        for (const auto& msg : r.warnings) out.warnings.push_back("station " + std::to_string(i + 1) + ": " + msg);
      }
    }
    const QueueMetrics m = queue_metrics(s.w, s.lambda, s.rho);
    s.q = m.q;
    s.x = m.x;
    s.sojourn = s.w + 1.0 / svc.rate;
    waiting[i] = s.w;
    out.stations.push_back(s);
  }
  out.total_by_entry = total_sojourn(waiting, model, rates);
  const double ext = rates.external.sum();
  out.total = rates.external.dot(out.total_by_entry) / ext;
  return out;
}

}  // namespace rqna
