#pragma once

#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <variant>

#include "rqna/error.hpp"
#include "rqna/phase_type.hpp"

namespace rqna {

enum class DistKind { Exponential, Erlang, HyperExponential2, Deterministic, PhaseType, Empirical };

// Phases used for the Erlang surrogate of a deterministic distribution.
inline constexpr int kDeterministicSurrogatePhases = 64;

/// Distribution tag attached to arrival and service specifications. All
/// parameters are expressed through the rate (reciprocal mean) plus a shape.
class Distribution {
 public:
  static Distribution exponential(double rate) { return {DistKind::Exponential, rate, 1, 1.0, {}}; }

  static Distribution erlang(int k, double rate) {
    if (k < 1) throw Error(ErrorCode::InvalidArgument, "Erlang shape must be >= 1");
    return {DistKind::Erlang, rate, k, 1.0 / k, {}};
  }

  static Distribution hyperexponential2(double rate, double scv) {
    if (!(scv >= 1.0)) throw Error(ErrorCode::InvalidArgument, "hyperexponential scv must be >= 1");
    return {DistKind::HyperExponential2, rate, 2, scv, {}};
  }

  static Distribution deterministic(double rate) { return {DistKind::Deterministic, rate, 0, 0.0, {}}; }

  static Distribution phase_type(PhaseTypeRenewal ph) {
    const double rate = 1.0 / ph.mean();
    const double scv = ph.scv();
    return {DistKind::PhaseType, rate, static_cast<int>(ph.phases()), scv, std::move(ph)};
  }

  /// Only the first two moments are known; not generative.
  static Distribution empirical(double rate, double scv) { return {DistKind::Empirical, rate, 0, scv, {}}; }

  /// Two-moment fit: deterministic for scv = 0, (mixed) Erlang below one,
  /// exponential at one and balanced-means hyperexponential above.
  static Distribution fit(double rate, double scv) {
    constexpr double eps = 1e-12;
    if (!(scv >= 0.0)) throw Error(ErrorCode::InvalidArgument, "scv must be nonnegative");
    if (scv < eps) return deterministic(rate);
    if (std::abs(scv - 1.0) < eps) return exponential(rate);
    if (scv > 1.0) return hyperexponential2(rate, scv);
    const double k = 1.0 / scv;
    if (std::abs(k - std::round(k)) < 1e-9) return erlang(static_cast<int>(std::round(k)), rate);
    return phase_type(PhaseTypeRenewal::mixed_erlang(rate, scv));
  }

  DistKind kind() const noexcept { return kind_; }
  double rate() const noexcept { return rate_; }
  double mean() const noexcept { return 1.0 / rate_; }
  double scv() const noexcept { return scv_; }
  int shape() const noexcept { return shape_; }
  bool generative() const noexcept { return kind_ != DistKind::Empirical; }

  /// Phase-type representation used for IDC computation. Deterministic
  /// distributions map to an Erlang surrogate; empirical ones have none.
  std::optional<PhaseTypeRenewal> phase_type_representation() const {
    switch (kind_) {
      case DistKind::Exponential: return PhaseTypeRenewal::exponential(rate_);
      case DistKind::Erlang: return PhaseTypeRenewal::erlang(shape_, rate_);
      case DistKind::HyperExponential2: return PhaseTypeRenewal::hyperexponential_balanced(rate_, scv_);
      case DistKind::Deterministic: return PhaseTypeRenewal::erlang(kDeterministicSurrogatePhases, rate_);
      case DistKind::PhaseType: return ph_;
      case DistKind::Empirical: return std::nullopt;
    }
    return std::nullopt;
  }

  const std::optional<PhaseTypeRenewal>& explicit_phase_type() const noexcept { return ph_; }

  std::string label() const {
    switch (kind_) {
      case DistKind::Exponential: return "exponential";
      case DistKind::Erlang: return "erlang";
      case DistKind::HyperExponential2: return "hyperexp2";
      case DistKind::Deterministic: return "deterministic";
      case DistKind::PhaseType: return "phase-type";
      case DistKind::Empirical: return "empirical";
    }
    return "unknown";
  }

 private:
  Distribution(DistKind kind, double rate, int shape, double scv, std::optional<PhaseTypeRenewal> ph)
      : kind_(kind), rate_(rate), shape_(shape), scv_(scv), ph_(std::move(ph)) {
    if (!(rate_ > 0.0) || !std::isfinite(rate_)) {
      throw Error(ErrorCode::InvalidArgument, "distribution rate must be positive and finite");
    }
  }

  DistKind kind_;
  double rate_;
  int shape_;
  double scv_;
  std::optional<PhaseTypeRenewal> ph_;
};

/// Variate generator for a generative distribution.
class VariateGenerator {
 public:
  explicit VariateGenerator(const Distribution& dist) : kind_(dist.kind()), mean_(dist.mean()) {
    switch (kind_) {
      case DistKind::Exponential:
        impl_ = std::exponential_distribution<double>(dist.rate());
        break;
      case DistKind::Erlang:
        impl_ = std::gamma_distribution<double>(dist.shape(), mean_ / dist.shape());
        break;
      case DistKind::HyperExponential2: {
        const double p1 = 0.5 * (1.0 + std::sqrt((dist.scv() - 1.0) / (dist.scv() + 1.0)));
        h2_p1_ = p1;
        h2_mean1_ = mean_ / (2.0 * p1);
        h2_mean2_ = mean_ / (2.0 * (1.0 - p1));
        break;
      }
      case DistKind::Deterministic:
        break;
      case DistKind::PhaseType:
        impl_ = PhaseTypeSampler(*dist.explicit_phase_type());
        break;
      case DistKind::Empirical:
        throw Error(ErrorCode::UnknownDistributionTag,
                    "an empirical IDC without a generative distribution cannot be sampled");
    }
  }

  template <class Rng>
  double operator()(Rng& rng) {
    switch (kind_) {
      case DistKind::Exponential: return std::get<std::exponential_distribution<double>>(impl_)(rng);
      case DistKind::Erlang: return std::get<std::gamma_distribution<double>>(impl_)(rng);
      case DistKind::HyperExponential2: {
        const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        const double m = u < h2_p1_ ? h2_mean1_ : h2_mean2_;
        return std::exponential_distribution<double>(1.0 / m)(rng);
      }
      case DistKind::Deterministic: return mean_;
      case DistKind::PhaseType: return std::get<PhaseTypeSampler>(impl_)(rng);
      case DistKind::Empirical: break;
    }
    return mean_;
  }

 private:
  DistKind kind_;
  double mean_;
  double h2_p1_ = 0.5, h2_mean1_ = 1.0, h2_mean2_ = 1.0;
  std::variant<std::monostate, std::exponential_distribution<double>, std::gamma_distribution<double>,
               PhaseTypeSampler>
      impl_;
};

}  // namespace rqna
