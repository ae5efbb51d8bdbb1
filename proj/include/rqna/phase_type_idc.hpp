#pragma once

#include <cmath>
#include <map>
#include <mutex>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "rqna/error.hpp"
#include "rqna/idc_curve.hpp"
#include "rqna/phase_type.hpp"

namespace rqna {

/// IDC of the time-stationary renewal process with PH(alpha, T) intervals.
///
/// The renewal process is the Markov arrival process D0 = T, D1 = t alpha'
/// (t = -T 1). With pi the stationary phase vector of D = D0 + D1 and
/// lambda = pi D1 1, the counting variance is
///
///   Var N(s) = c1 s - 2 pi D1 (I - e^{Ds}) (1 pi - D)^{-2} D1 1,
///   c1 = lambda - 2 lambda^2 + 2 pi D1 (1 pi - D)^{-1} D1 1,
///
/// so I(s) = Var N(s) / (lambda s) and I(inf) = c1 / lambda = scv.
inline IdcCurve idc_phase_type(const PhaseTypeRenewal& ph, std::span<const double> grid) {
  if (grid.empty()) throw Error(ErrorCode::InvalidArgument, "empty IDC grid");
  const Eigen::Index n = ph.phases();
  const Eigen::VectorXd exits = ph.exit_rates();
  const Eigen::MatrixXd d = ph.generator() + exits * ph.alpha().transpose();

  // pi D = 0, pi 1 = 1.
  Eigen::MatrixXd lhs = d.transpose();
  lhs.row(n - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs[n - 1] = 1.0;
  const Eigen::VectorXd pi = lhs.fullPivLu().solve(rhs);
  if (!pi.allFinite()) throw Error(ErrorCode::InvalidGenerator, "no stationary phase distribution");

  const double rate = pi.dot(exits);
  const Eigen::MatrixXd fundamental = Eigen::VectorXd::Ones(n) * pi.transpose() - d;
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(fundamental);
  const Eigen::VectorXd v = lu.solve(exits);  // (1 pi - D)^{-1} D1 1
  const Eigen::VectorXd y = lu.solve(v);
  const Eigen::VectorXd u = rate * ph.alpha();  // pi D1 as a column
  const double c1 = rate - 2.0 * rate * rate + 2.0 * u.dot(v);
  const double uy = u.dot(y);
  const double limit = rate * pi.dot(y);  // u e^{Ds} y as s -> inf

  std::vector<double> values;
  values.reserve(grid.size());
  int converged_streak = 0;
  for (double s : grid) {
    double transient = limit;
    if (converged_streak < 2) {
      const Eigen::MatrixXd e = (d * s).exp();
      transient = u.dot(e * y);
      const double scale = std::abs(uy) + std::abs(limit) + 1e-300;
      converged_streak = std::abs(transient - limit) < 1e-15 * scale ? converged_streak + 1 : 0;
    }
    const double var = c1 * s - 2.0 * (uy - transient);
    values.push_back(std::max(var / (rate * s), 0.0));
  }
  return IdcCurve(std::vector<double>(grid.begin(), grid.end()), std::move(values), std::max(c1 / rate, 0.0), 1.0);
}

namespace detail {

inline std::string grid_key(std::span<const double> grid) {
  std::ostringstream os;
  os.precision(17);
  os << grid.size() << ':' << grid.front() << ':' << grid.back();
  return os.str();
}

}  // namespace detail

/// Memoised idc_phase_type; curves are immutable so sharing is safe.
inline IdcCurve idc_phase_type_cached(const PhaseTypeRenewal& ph, std::span<const double> grid) {
  static std::mutex mutex;
  static std::map<std::string, IdcCurve> cache;
  const std::string key = ph.key() + '|' + detail::grid_key(grid);
  {
    std::lock_guard<std::mutex> lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  IdcCurve curve = idc_phase_type(ph, grid);
  std::lock_guard<std::mutex> lock(mutex);
  return cache.emplace(key, std::move(curve)).first->second;
}

}  // namespace rqna
