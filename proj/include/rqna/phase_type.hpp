#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rqna/error.hpp"

namespace rqna {

/// Renewal process whose inter-event times are phase-type PH(alpha, T):
/// alpha is the initial phase distribution, T the transient sub-generator and
/// -T * 1 the exit-rate vector.
class PhaseTypeRenewal {
 public:
  PhaseTypeRenewal() = default;

  PhaseTypeRenewal(Eigen::VectorXd alpha, Eigen::MatrixXd generator)
      : alpha_(std::move(alpha)), generator_(std::move(generator)) {
    validate();
  }

  const Eigen::VectorXd& alpha() const noexcept { return alpha_; }
  const Eigen::MatrixXd& generator() const noexcept { return generator_; }
  Eigen::Index phases() const noexcept { return alpha_.size(); }

  Eigen::VectorXd exit_rates() const { return -generator_ * Eigen::VectorXd::Ones(phases()); }

  double mean() const { return moment(1); }

  double scv() const {
    const double m1 = moment(1);
    return moment(2) / (m1 * m1) - 1.0;
  }

  /// k-th raw moment k! alpha (-T)^{-k} 1.
  double moment(int k) const {
    const Eigen::MatrixXd inv = (-generator_).inverse();
    Eigen::VectorXd v = Eigen::VectorXd::Ones(phases());
    double factorial = 1.0;
    for (int j = 1; j <= k; ++j) {
      v = inv * v;
      factorial *= j;
    }
    return factorial * alpha_.dot(v);
  }

  /// Stable textual key, used for caching computed curves.
  std::string key() const {
    std::ostringstream os;
    os.precision(17);
    os << "ph" << phases() << ':';
    for (Eigen::Index i = 0; i < phases(); ++i) os << alpha_[i] << ',';
    for (Eigen::Index i = 0; i < phases(); ++i) {
      for (Eigen::Index j = 0; j < phases(); ++j) os << generator_(i, j) << ',';
    }
    return os.str();
  }

  static PhaseTypeRenewal exponential(double rate) {
    return erlang(1, rate);
  }

  /// Erlang-k with mean 1/rate.
  static PhaseTypeRenewal erlang(int k, double rate) {
    if (k < 1 || !(rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "Erlang needs k >= 1 and rate > 0");
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(k);
    alpha[0] = 1.0;
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(k, k);
    const double phase_rate = k * rate;
    for (int i = 0; i < k; ++i) {
      t(i, i) = -phase_rate;
      if (i + 1 < k) t(i, i + 1) = phase_rate;
    }
    return {std::move(alpha), std::move(t)};
  }

  /// Mixture of Erlang-(k-1) and Erlang-k with a common phase rate, matching
  /// mean 1/rate and 1/k <= scv <= 1/(k-1).
  static PhaseTypeRenewal mixed_erlang(double rate, double scv) {
    if (!(scv > 0.0) || scv > 1.0) throw Error(ErrorCode::InvalidArgument, "mixed Erlang needs 0 < scv <= 1");
    const int k = static_cast<int>(std::ceil(1.0 / scv - 1e-12));
    const double mean = 1.0 / rate;
    const double p = (k * scv - std::sqrt(k * (1.0 + scv) - k * k * scv)) / (1.0 + scv);
    const double phase_rate = (k - p) / mean;
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(k);
    alpha[0] = 1.0 - p;
    if (k > 1) alpha[1] = p;
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(k, k);
    for (int i = 0; i < k; ++i) {
      t(i, i) = -phase_rate;
      if (i + 1 < k) t(i, i + 1) = phase_rate;
    }
    return {std::move(alpha), std::move(t)};
  }

  /// Two-phase hyperexponential with balanced means.
  static PhaseTypeRenewal hyperexponential_balanced(double rate, double scv) {
    if (!(scv >= 1.0)) throw Error(ErrorCode::InvalidArgument, "hyperexponential needs scv >= 1");
    const double mean = 1.0 / rate;
    const double p1 = 0.5 * (1.0 + std::sqrt((scv - 1.0) / (scv + 1.0)));
    const double p2 = 1.0 - p1;
    Eigen::VectorXd alpha(2);
    alpha << p1, p2;
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(2, 2);
    t(0, 0) = -2.0 * p1 / mean;
    t(1, 1) = -2.0 * p2 / mean;
    return {std::move(alpha), std::move(t)};
  }

  /// Total of a geometric number N >= 1 of i.i.d. copies, P(N > n) = p^n:
  /// each exit restarts the phase process with probability p.
  PhaseTypeRenewal geometric_sum(double p) const {
    if (!(p >= 0.0) || !(p < 1.0)) throw Error(ErrorCode::InvalidArgument, "feedback probability must lie in [0, 1)");
    Eigen::MatrixXd t = generator_ + p * exit_rates() * alpha_.transpose();
    return {alpha_, std::move(t)};
  }

 private:
  void validate() const {
    const Eigen::Index n = alpha_.size();
    if (n == 0 || generator_.rows() != n || generator_.cols() != n) {
      throw Error(ErrorCode::InvalidGenerator, "phase-type dimensions mismatch");
    }
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (alpha_[i] < -1e-12) throw Error(ErrorCode::InvalidGenerator, "initial probabilities must be nonnegative");
      total += alpha_[i];
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw Error(ErrorCode::InvalidGenerator, "initial probabilities must sum to one");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!(generator_(i, i) < 0.0)) throw Error(ErrorCode::InvalidGenerator, "diagonal entries must be negative");
      double row = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i != j && generator_(i, j) < 0.0) {
          throw Error(ErrorCode::InvalidGenerator, "off-diagonal entries must be nonnegative");
        }
        row += generator_(i, j);
      }
      if (row > 1e-9 * std::abs(generator_(i, i))) {
        throw Error(ErrorCode::InvalidGenerator, "row sums of a sub-generator must be nonpositive");
      }
    }
    // Absorption must be certain, i.e. T nonsingular.
    Eigen::FullPivLU<Eigen::MatrixXd> lu(generator_);
    if (!lu.isInvertible()) throw Error(ErrorCode::InvalidGenerator, "sub-generator is singular");
    if (!(mean() > 0.0)) throw Error(ErrorCode::InvalidGenerator, "mean must be positive");
  }

  Eigen::VectorXd alpha_;
  Eigen::MatrixXd generator_;
};

/// Draws phase-type variates by walking the phase process.
class PhaseTypeSampler {
 public:
  explicit PhaseTypeSampler(const PhaseTypeRenewal& ph) {
    const Eigen::Index n = ph.phases();
    initial_.assign(ph.alpha().data(), ph.alpha().data() + n);
    const Eigen::VectorXd exits = ph.exit_rates();
    rates_.resize(n);
    jumps_.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      rates_[i] = -ph.generator()(i, i);
      std::vector<double> w(static_cast<std::size_t>(n) + 1, 0.0);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j != i) w[j] = ph.generator()(i, j);
      }
      w[n] = std::max(exits[i], 0.0);
      jumps_[i] = std::discrete_distribution<Eigen::Index>(w.begin(), w.end());
    }
    start_ = std::discrete_distribution<Eigen::Index>(initial_.begin(), initial_.end());
  }

  template <class Rng>
  double operator()(Rng& rng) {
    const auto n = static_cast<Eigen::Index>(rates_.size());
    Eigen::Index phase = start_(rng);
    double total = 0.0;
    while (phase < n) {
      total += std::exponential_distribution<double>(rates_[phase])(rng);
      phase = jumps_[phase](rng);
    }
    return total;
  }

 private:
  std::vector<double> initial_;
  std::vector<double> rates_;
  std::vector<std::discrete_distribution<Eigen::Index>> jumps_;
  std::discrete_distribution<Eigen::Index> start_;
};

}  // namespace rqna
