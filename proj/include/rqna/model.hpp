#pragma once

#include <cmath>
#include <complex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rqna/distribution.hpp"
#include "rqna/error.hpp"
#include "rqna/idc_curve.hpp"
#include "rqna/phase_type_idc.hpp"

namespace rqna {

struct ArrivalSpec {
  double rate = 0.0;
  IdcCurve idc;
  std::optional<Distribution> dist;
};

struct ServiceSpec {
  double rate = 1.0;
  double scv = 1.0;
  IdcCurve idc;
  std::optional<Distribution> dist;
};

struct NetworkModel {
  Eigen::MatrixXd routing;
  std::vector<ArrivalSpec> arrivals;
  std::vector<ServiceSpec> services;

  int stations() const noexcept { return static_cast<int>(services.size()); }
  double exit_probability(int i) const { return 1.0 - routing.row(i).sum(); }
};

// Slack allowed between a service IDC asymptote and the declared scv. Covers
// the Erlang-64 surrogate used for deterministic service.
inline constexpr double kServiceAsymptoteTolerance = 0.02;

/// IDC of the stationary renewal process generated by `dist`.
inline IdcCurve renewal_idc(const Distribution& dist, std::span<const double> grid) {
  if (dist.kind() == DistKind::Exponential) return IdcCurve::constant(1.0, {grid.begin(), grid.end()});
  auto ph = dist.phase_type_representation();
  if (!ph) {
    throw Error(ErrorCode::UnknownDistributionTag, "an empirical distribution needs an explicit IDC");
  }
  return idc_phase_type_cached(*ph, grid);
}

inline ArrivalSpec make_arrival(const Distribution& dist, std::span<const double> grid) {
  return {dist.rate(), renewal_idc(dist, grid), dist};
}

inline ArrivalSpec no_arrivals(std::span<const double> grid) {
  return {0.0, IdcCurve::constant(1.0, {grid.begin(), grid.end()}), std::nullopt};
}

inline ServiceSpec make_service(const Distribution& dist, std::span<const double> grid) {
  return {dist.rate(), dist.scv(), renewal_idc(dist, grid), dist};
}

/// Checks every invariant of the model and throws on the first violation.
inline const NetworkModel& validate(const NetworkModel& model) {
  const int k = model.stations();
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "network has no stations");
  if (static_cast<int>(model.arrivals.size()) != k || model.routing.rows() != k || model.routing.cols() != k) {
    throw Error(ErrorCode::InvalidArgument, "routing, arrivals and services must all have K entries");
  }
  constexpr double tol = 1e-9;
  for (int i = 0; i < k; ++i) {
    double row = 0.0;
    for (int j = 0; j < k; ++j) {
      const double p = model.routing(i, j);
      if (!std::isfinite(p) || p < -tol || p > 1.0 + tol) {
        throw Error(ErrorCode::InvalidArgument,
                    "routing probability p[" + std::to_string(i + 1) + "][" + std::to_string(j + 1) + "] outside [0,1]");
      }
      row += p;
    }
    if (row > 1.0 + tol) {
      throw Error(ErrorCode::RowSumExceedsOne, "routing row " + std::to_string(i + 1) + " sums to " + std::to_string(row));
    }
  }

  bool any_external = false;
  for (int i = 0; i < k; ++i) {
    const auto& a = model.arrivals[i];
    if (!(a.rate >= 0.0) || !std::isfinite(a.rate)) {
      throw Error(ErrorCode::InvalidArgument, "external arrival rate at station " + std::to_string(i + 1) + " is negative");
    }
    if (a.rate > 0.0) {
      any_external = true;
      if (a.idc.empty()) throw Error(ErrorCode::InvalidArgument, "missing arrival IDC at station " + std::to_string(i + 1));
    }
    const auto& s = model.services[i];
    if (!(s.rate > 0.0) || !std::isfinite(s.rate)) {
      throw Error(ErrorCode::NonpositiveServiceRate, "station " + std::to_string(i + 1));
    }
    if (!(s.scv >= 0.0) || !std::isfinite(s.scv)) {
      throw Error(ErrorCode::InvalidArgument, "service scv at station " + std::to_string(i + 1) + " is negative");
    }
    if (s.idc.empty()) throw Error(ErrorCode::InvalidArgument, "missing service IDC at station " + std::to_string(i + 1));
    if (std::abs(s.idc.asymptote() - s.scv) > kServiceAsymptoteTolerance + 1e-6 * s.scv) {
      throw Error(ErrorCode::InvalidArgument,
                  "service IDC asymptote differs from scv at station " + std::to_string(i + 1));
    }
  }
  if (!any_external) throw Error(ErrorCode::NoExternalArrivals, "no station has external arrivals");

  // Transience of the routing chain: spectral radius of P below one.
  const Eigen::EigenSolver<Eigen::MatrixXd> eig(model.routing, false);
  double radius = 0.0;
  for (Eigen::Index j = 0; j < eig.eigenvalues().size(); ++j) radius = std::max(radius, std::abs(eig.eigenvalues()[j]));
  if (!(radius < 1.0 - 1e-10)) {
    throw Error(ErrorCode::NotInvertible, "routing spectral radius " + std::to_string(radius) + " is not below one");
  }
  return model;
}

}  // namespace rqna
