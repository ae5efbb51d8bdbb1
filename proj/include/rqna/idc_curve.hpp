#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rqna/error.hpp"

namespace rqna {

/// Log-spaced time grid description. Bounds are in model time units.
struct GridSpec {
  double lo = 1e-3;
  double hi = 1e7;
  int points_per_decade = 25;

  std::vector<double> points() const {
    if (!(lo > 0.0) || !(hi > lo) || points_per_decade < 1) {
      throw Error(ErrorCode::InvalidArgument, "grid needs 0 < lo < hi and points_per_decade >= 1");
    }
    const double decades = std::log10(hi / lo);
    const auto n = static_cast<std::size_t>(std::ceil(decades * points_per_decade - 1e-9));
    std::vector<double> out;
    out.reserve(n + 1);
    for (std::size_t k = 0; k <= n; ++k) {
      out.push_back(lo * std::pow(10.0, static_cast<double>(k) / points_per_decade));
    }
    out.back() = std::max(out.back(), hi);
    return out;
  }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Index of dispersion for counts I(t) = Var(A(t)) / E[A(t)], sampled on a
/// strictly increasing time grid and completed by its limits at 0+ and infinity.
///
/// Evaluation: value_at_zero for t <= grid.front(), log-linear interpolation in
/// t between grid points, asymptote for t >= grid.back().
class IdcCurve {
 public:
  IdcCurve() = default;

  IdcCurve(std::vector<double> grid, std::vector<double> values, double asymptote,
           double value_at_zero = 1.0)
      : grid_(std::move(grid)),
        values_(std::move(values)),
        asymptote_(asymptote),
        value_at_zero_(value_at_zero) {
    if (grid_.empty() || grid_.size() != values_.size()) {
      throw Error(ErrorCode::InvalidArgument, "IDC grid and values must be non-empty and of equal length");
    }
    if (!(grid_.front() > 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "IDC grid times must be positive");
    }
    for (std::size_t k = 1; k < grid_.size(); ++k) {
      if (!(grid_[k] > grid_[k - 1])) {
        throw Error(ErrorCode::InvalidArgument, "IDC grid must be strictly increasing");
      }
    }
    for (double v : values_) {
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw Error(ErrorCode::InvalidArgument, "IDC values must be finite and nonnegative");
      }
    }
    if (!(asymptote_ >= 0.0) || !std::isfinite(asymptote_) || !(value_at_zero_ >= 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "IDC limits must be finite and nonnegative");
    }
  }

  static IdcCurve constant(double value, std::vector<double> grid) {
    std::vector<double> values(grid.size(), value);
    return IdcCurve(std::move(grid), std::move(values), value, value);
  }

  const std::vector<double>& grid() const noexcept { return grid_; }
  const std::vector<double>& values() const noexcept { return values_; }
  double asymptote() const noexcept { return asymptote_; }
  double value_at_zero() const noexcept { return value_at_zero_; }
  bool empty() const noexcept { return grid_.empty(); }

  double operator()(double t) const {
    if (t <= grid_.front()) return value_at_zero_;
    if (t >= grid_.back()) return asymptote_;
    const auto it = std::upper_bound(grid_.begin(), grid_.end(), t);
    const auto k = static_cast<std::size_t>(it - grid_.begin());
    const double t0 = grid_[k - 1];
    const double t1 = grid_[k];
    const double frac = std::log(t / t0) / std::log(t1 / t0);
    const double v = values_[k - 1] + frac * (values_[k] - values_[k - 1]);
    return std::max(v, 0.0);
  }

 private:
  std::vector<double> grid_;
  std::vector<double> values_;
  double asymptote_ = 1.0;
  double value_at_zero_ = 1.0;
};

inline double evaluate(const IdcCurve& curve, double t) {
  if (t < 0.0) throw Error(ErrorCode::InvalidArgument, "IDC evaluated at negative time");
  return curve(t);
}

/// Returns the curve t -> curve(factor * t). Only the grid moves, so
/// evaluation commutes exactly with the rescaling.
inline IdcCurve time_scale(const IdcCurve& curve, double factor) {
  if (!(factor > 0.0) || !std::isfinite(factor)) {
    throw Error(ErrorCode::InvalidArgument, "time-scale factor must be positive");
  }
  std::vector<double> grid = curve.grid();
  for (double& t : grid) t /= factor;
  return IdcCurve(std::move(grid), curve.values(), curve.asymptote(), curve.value_at_zero());
}

/// Samples `curve` at the given times; limits are carried over.
inline IdcCurve resample(const IdcCurve& curve, std::span<const double> grid) {
  std::vector<double> values;
  values.reserve(grid.size());
  for (double t : grid) values.push_back(curve(t));
  return IdcCurve(std::vector<double>(grid.begin(), grid.end()), std::move(values), curve.asymptote(),
                  curve.value_at_zero());
}

inline void write_csv(std::ostream& os, const IdcCurve& curve) {
  os << "t,value\n";
  const auto old = os.precision(17);
  for (std::size_t k = 0; k < curve.grid().size(); ++k) {
    os << curve.grid()[k] << ',' << curve.values()[k] << '\n';
  }
  os.precision(old);
}

}  // namespace rqna
