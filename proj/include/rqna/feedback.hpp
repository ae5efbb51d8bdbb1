#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rqna/error.hpp"
#include "rqna/flow_calculus.hpp"
#include "rqna/model.hpp"
#include "rqna/renewal_idc.hpp"

namespace rqna {

/// Stations a near-immediate excursion from h may pass through: every j != h
/// with rho_j <= rho_h. `hit[u]` is the probability that a customer leaving u
/// reaches h before exiting or entering a station with rho > rho_h.
struct FirstPassage {
  int station = 0;
  std::vector<int> passable;
  Eigen::VectorXd hit;  // indexed by station; zero outside the passable set
  double p_hat = 0.0;
};

inline FirstPassage first_passage(const NetworkModel& model, const RateSolution& rates, int h) {
  const int k = model.stations();
  const Eigen::MatrixXd& p = model.routing;
  FirstPassage fp;
  fp.station = h;
  fp.hit = Eigen::VectorXd::Zero(k);
  // Equal intensities count as passable; the slack absorbs rounding in the rate solve.
  const double bound = rates.rho[h] * (1.0 + 1e-9);
  for (int j = 0; j < k; ++j) {
    if (j != h && rates.rho[j] <= bound) fp.passable.push_back(j);
  }
  const auto n = static_cast<Eigen::Index>(fp.passable.size());
  if (n > 0) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd b(n);
    for (Eigen::Index r = 0; r < n; ++r) {
      const int u = fp.passable[static_cast<std::size_t>(r)];
      b[r] = p(u, h);
      for (Eigen::Index c = 0; c < n; ++c) a(r, c) -= p(u, fp.passable[static_cast<std::size_t>(c)]);
    }
    const Eigen::VectorXd q = a.partialPivLu().solve(b);
    for (Eigen::Index r = 0; r < n; ++r) {
      fp.hit[fp.passable[static_cast<std::size_t>(r)]] = std::clamp(q[r], 0.0, 1.0);
    }
  }
  double ph = p(h, h);
  for (int v : fp.passable) ph += p(h, v) * fp.hit[v];
  fp.p_hat = std::clamp(ph, 0.0, 1.0);
  return fp;
}

/// Probability that a customer leaving h returns to h without visiting any
/// station with strictly higher traffic intensity.
inline double near_immediate_probability(const NetworkModel& model, const RateSolution& rates, int h) {
  return first_passage(model, rates, h).p_hat;
}

struct StationElimination {
  int station = 0;
  double p_hat = 0.0;
  std::vector<int> passable;
  std::vector<std::pair<int, int>> eliminated_flows;  // zero-based (from, to)
  NetworkModel reduced;
  double factor = 1.0;  // per-visit correction 1 - p_hat
  std::vector<std::string> warnings;
};

struct EliminationPlan {
  std::vector<StationElimination> stations;

  const StationElimination* find(int h) const {
    for (const auto& s : stations) {
      if (s.station == h) return &s;
    }
    return nullptr;
  }
  bool empty() const noexcept { return stations.empty(); }
};

/// Reduced network seen by station h once its near-immediate feedback is
/// folded into a geometric service.
///
/// Excursions from h are split by the chain conditioned on not returning:
/// a customer leaving h moves on with the original routing reweighted by the
/// non-return probability of the target, until it exits, enters a station
/// with higher rho, or leaves the passable set. Customers not on such an
/// excursion keep the original routing. The two customer types are merged
/// per station by their flow rates, giving a K-station Markov routing in
/// which h receives exactly its first-passage arrivals, at rate lambda_h (1 - p_hat).
inline StationElimination eliminate_station(const NetworkModel& model, const RateSolution& rates, int h,
                                            std::span<const double> grid,
                                            const GeometricServiceOptions& service_opt = {}) {
  const int k = model.stations();
  const Eigen::MatrixXd& p = model.routing;
  const FirstPassage fp = first_passage(model, rates, h);
  StationElimination out;
  out.station = h;
  out.p_hat = fp.p_hat;
  out.passable = fp.passable;
  out.factor = 1.0 - fp.p_hat;
  if (!(fp.p_hat < 1.0)) throw Error(ErrorCode::Unstable, "station " + std::to_string(h + 1) + " never releases customers");

  std::vector<bool> in_s(static_cast<std::size_t>(k), false);
  for (int u : fp.passable) in_s[static_cast<std::size_t>(u)] = true;

  // Augmented nodes: [0, k) plain copies (node h is h itself), then one excursion copy per passable station.
  std::vector<int> excursion(static_cast<std::size_t>(k), -1);
  int n = k;
  for (int u : fp.passable) excursion[static_cast<std::size_t>(u)] = n++;
  std::vector<int> base(static_cast<std::size_t>(n));
  for (int u = 0; u < k; ++u) base[static_cast<std::size_t>(u)] = u;
  for (int u : fp.passable) base[static_cast<std::size_t>(excursion[static_cast<std::size_t>(u)])] = u;

  constexpr double sure = 1.0 - 1e-12;
  Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(n, n);
  for (int u = 0; u < k; ++u) {
    if (u == h) continue;
    for (int v = 0; v < k; ++v) aug(u, v) = p(u, v);
  }
  const double keep = 1.0 - fp.p_hat;
  for (int v = 0; v < k; ++v) {
    if (v == h || p(h, v) == 0.0) continue;
    if (in_s[static_cast<std::size_t>(v)]) {
      aug(h, excursion[static_cast<std::size_t>(v)]) = p(h, v) * (1.0 - fp.hit[v]) / keep;
    } else {
      aug(h, v) = p(h, v) / keep;
    }
  }
  for (int u : fp.passable) {
    const int row = excursion[static_cast<std::size_t>(u)];
    const double stay = 1.0 - fp.hit[u];
    if (fp.hit[u] > sure) continue;  // unreachable in the conditioned chain
    for (int v = 0; v < k; ++v) {
      if (v == h || p(u, v) == 0.0) continue;
      if (in_s[static_cast<std::size_t>(v)]) {
        aug(row, excursion[static_cast<std::size_t>(v)]) = p(u, v) * (1.0 - fp.hit[v]) / stay;
      } else {
        aug(row, v) = p(u, v) / stay;
      }
    }
  }

  Eigen::VectorXd ext = Eigen::VectorXd::Zero(n);
  for (int u = 0; u < k; ++u) ext[u] = rates.external[u];
  const Eigen::VectorXd lam =
      (Eigen::MatrixXd::Identity(n, n) - aug.transpose()).partialPivLu().solve(ext).cwiseMax(0.0);

  Eigen::VectorXd merged = Eigen::VectorXd::Zero(k);
  Eigen::MatrixXd flow = Eigen::MatrixXd::Zero(k, k);
  for (int a = 0; a < n; ++a) {
    const int u = base[static_cast<std::size_t>(a)];
    merged[u] += lam[a];
    for (int b = 0; b < n; ++b) flow(u, base[static_cast<std::size_t>(b)]) += lam[a] * aug(a, b);
  }
  const double tiny = 1e-12 * std::max(1.0, rates.lambda.maxCoeff());

  out.reduced = model;
  Eigen::MatrixXd& routing = out.reduced.routing;
  routing.setZero();
  for (int u = 0; u < k; ++u) {
    if (merged[u] <= tiny) continue;
    for (int v = 0; v < k; ++v) {
      if (flow(u, v) > tiny) routing(u, v) = flow(u, v) / merged[u];
    }
    const double row = routing.row(u).sum();
    if (row > 1.0) routing.row(u) /= row;
  }
  std::vector<std::string> warn;
  out.reduced.services[h] = idc_geometric_service(model.services[h], fp.p_hat, grid, service_opt, &warn);
  out.warnings.insert(out.warnings.end(), warn.begin(), warn.end());

  // Audit: flows removed altogether, and departures from h towards passable
  // stations that now carry only the non-returning share.
  for (int u = 0; u < k; ++u) {
    for (int v = 0; v < k; ++v) {
      if (rates.flow(u, v) <= tiny) continue;
      const bool removed = flow(u, v) <= tiny;
      const bool thinned = u == h && in_s[static_cast<std::size_t>(v)] && fp.hit[v] > 0.0 &&
                           (1.0 - fp.hit[v]) / keep < 1.0 - 1e-12;
      if (removed || thinned) out.eliminated_flows.emplace_back(u, v);
    }
  }
  return out;
}

/// Plan covering every station with a positive near-immediate feedback probability.
inline EliminationPlan build_elimination_plan(const NetworkModel& model, const RateSolution& rates,
                                              std::span<const double> grid,
                                              const GeometricServiceOptions& service_opt = {}) {
  EliminationPlan plan;
  for (int h = 0; h < model.stations(); ++h) {
    if (!rates.active(h)) continue;
    if (near_immediate_probability(model, rates, h) <= 1e-12) continue;
    plan.stations.push_back(eliminate_station(model, rates, h, grid, service_opt));
  }
  return plan;
}

/// Per-visit waiting time from the waiting time of the modified system.
inline double adjusted_waiting(double modified_w, double p_hat) {
  if (!(p_hat >= 0.0) || !(p_hat < 1.0)) throw Error(ErrorCode::InvalidArgument, "p_hat must lie in [0, 1)");
  return (1.0 - p_hat) * modified_w;
}

}  // namespace rqna
