#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "rqna/distribution.hpp"
#include "rqna/error.hpp"
#include "rqna/idc_curve.hpp"
#include "rqna/model.hpp"
#include "rqna/phase_type_idc.hpp"

namespace rqna {

/// Sorted event timestamps observed on [0, horizon].
struct EventLog {
  std::vector<double> times;
  double horizon = 0.0;

  void check() const {
    for (std::size_t k = 0; k < times.size(); ++k) {
      if (!(times[k] >= 0.0) || times[k] > horizon || (k > 0 && times[k] < times[k - 1])) {
        throw Error(ErrorCode::InvalidArgument, "event timestamps must be nondecreasing and lie in [0, horizon]");
      }
    }
  }

  /// One timestamp per line. Blank lines and '#' comments are skipped, except
  /// "# horizon <h>"; without it the horizon is the last timestamp.
  static EventLog read(std::istream& in) {
    EventLog log;
    double horizon = -1.0;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos) continue;
      if (line[first] == '#') {
        std::istringstream is(line.substr(first + 1));
        std::string word;
        if (is >> word && word == "horizon" && !(is >> horizon)) {
          throw Error(ErrorCode::ParseError, "bad horizon on line " + std::to_string(lineno));
        }
        continue;
      }
      std::istringstream is(line);
      double t = 0.0;
      if (!(is >> t)) throw Error(ErrorCode::ParseError, "bad timestamp on line " + std::to_string(lineno));
      log.times.push_back(t);
    }
    log.horizon = horizon >= 0.0 ? horizon : (log.times.empty() ? 0.0 : log.times.back());
    log.check();
    return log;
  }

  void write(std::ostream& out) const {
    const auto old = out.precision(17);
    out << "# horizon " << horizon << '\n';
    for (double t : times) out << t << '\n';
    out.precision(old);
  }
};

struct IdcEstimateOptions {
  double stride_fraction = 0.1;             // window stride as a fraction of t
  std::size_t max_windows = std::size_t{1} << 20;
  std::size_t min_events = 10000;           // warn below this
  double reliable_fraction = 0.1;           // keep t <= fraction * horizon
};

struct IdcEstimate {
  double rate = 0.0;
  IdcCurve curve;
  std::vector<double> std_errors;  // per retained grid point
  std::vector<std::string> warnings;
};

namespace detail {

// First index >= from with times[index] >= x, galloping from `from`.
inline std::size_t gallop(const std::vector<double>& times, std::size_t from, double x) {
  const std::size_t n = times.size();
  if (from >= n || times[from] >= x) return from;
  std::size_t step = 1;
  std::size_t lo = from;
  std::size_t hi = from + 1;
  while (hi < n && times[hi] < x) {
    lo = hi;
    step *= 2;
    hi = std::min(n, hi + step);
  }
  return static_cast<std::size_t>(std::lower_bound(times.begin() + lo, times.begin() + hi, x) - times.begin());
}

}  // namespace detail

/// Rate and IDC estimate from a stationary sample path. For each grid t the
/// counts in overlapping windows [s, s + t) are collected and their sample
/// variance is divided by rate * t.
inline IdcEstimate idc_from_events(const EventLog& log, std::span<const double> grid,
                                   const IdcEstimateOptions& opt = {}) {
  if (log.times.empty() || !(log.horizon > 0.0)) throw Error(ErrorCode::EmptyLog, "no events to estimate from");
  log.check();
  IdcEstimate out;
  const double horizon = log.horizon;
  const auto n = log.times.size();
  out.rate = static_cast<double>(n) / horizon;
  if (n < opt.min_events) {
    out.warnings.push_back("only " + std::to_string(n) + " events; estimate is unreliable");
  }

  std::vector<double> ts;
  std::vector<double> vs;
  std::vector<double> counts;
  for (double t : grid) {
    if (t > opt.reliable_fraction * horizon) break;
    const double span = horizon - t;
    double stride = std::max(opt.stride_fraction * t, span / static_cast<double>(opt.max_windows - 1));
    const auto windows = static_cast<std::size_t>(std::floor(span / stride)) + 1;
    std::size_t lo = 0;
    std::size_t hi = 0;
    counts.clear();
    double mean = 0.0;
    for (std::size_t m = 0; m < windows; ++m) {
      const double s = static_cast<double>(m) * stride;
      lo = detail::gallop(log.times, lo, s);
      hi = detail::gallop(log.times, std::max(hi, lo), s + t);
      counts.push_back(static_cast<double>(hi - lo));
      mean += counts.back();
    }
    mean /= static_cast<double>(windows);
    double m2 = 0.0;
    double m4 = 0.0;
    for (double c : counts) {
      const double d2 = (c - mean) * (c - mean);
      m2 += d2;
      m4 += d2 * d2;
    }
    const double var = windows > 1 ? m2 / static_cast<double>(windows - 1) : 0.0;
    m4 /= static_cast<double>(windows);
    const double value = var / (out.rate * t);
    ts.push_back(t);
    vs.push_back(value);
    // Overlapping windows carry about horizon / t independent counts.
    const double effective = std::min(static_cast<double>(windows), horizon / t);
    out.std_errors.push_back(std::sqrt(std::max(m4 - var * var, 0.0) / effective) / (out.rate * t));
  }
  if (ts.empty()) {
    throw Error(ErrorCode::HorizonTooShort, "horizon " + std::to_string(horizon) + " is too short for the grid");
  }
  if (ts.size() < grid.size()) {
    out.warnings.push_back("HorizonTooShort: curve truncated at t = " + std::to_string(ts.back()));
  }
  const double asymptote = vs.back();
  out.curve = IdcCurve(std::move(ts), std::move(vs), asymptote, 1.0);
  return out;
}

/// Stationary renewal path with the given interval law, observed on [0, horizon].
/// The start is made stationary by discarding a burn-in of `burn_in` intervals.
template <class Sampler, class Rng>
EventLog simulate_renewal(Sampler& sample, Rng& rng, double horizon, std::size_t burn_in = 1000) {
  double t = 0.0;
  for (std::size_t k = 0; k < burn_in; ++k) t += sample(rng);
  // Shift so the observation starts at a random point inside the current interval.
  double next = sample(rng) * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  EventLog log;
  log.horizon = horizon;
  while (next <= horizon) {
    log.times.push_back(next);
    next += sample(rng);
  }
  return log;
}

struct GeometricServiceOptions {
  bool prefer_monte_carlo = false;
  std::uint64_t seed = 20240601;
  double mc_horizon_services = 2e6;  // simulated horizon in mean service times
};

/// Service spec of S_p, the sum of a geometric number N >= 1 of service times
/// with P(N > n) = p^n, i.e. the total time a customer spends in service when
/// it immediately feeds back with probability p.
inline ServiceSpec idc_geometric_service(const ServiceSpec& service, double p, std::span<const double> grid,
                                         const GeometricServiceOptions& opt = {},
                                         std::vector<std::string>* warnings = nullptr) {
  if (!(p >= 0.0) || !(p < 1.0)) throw Error(ErrorCode::InvalidArgument, "feedback probability must lie in [0, 1)");
  if (p == 0.0) return service;
  ServiceSpec out;
  out.rate = (1.0 - p) * service.rate;
  out.scv = p + (1.0 - p) * service.scv;

  const bool generative = service.dist && service.dist->generative();
  const auto ph = service.dist ? service.dist->phase_type_representation() : std::nullopt;

  if (!generative) {
    if (warnings) warnings->push_back("service without a generative distribution; geometric sum fitted on two moments");
    const Distribution fit = Distribution::fit(out.rate, out.scv);
    out.idc = renewal_idc(fit, grid);
    out.dist = fit;
    return out;
  }

  if (ph && !opt.prefer_monte_carlo) {
    const PhaseTypeRenewal sum = ph->geometric_sum(p);
    out.idc = idc_phase_type_cached(sum, grid);
    out.dist = Distribution::phase_type(sum);
    return out;
  }

  std::mt19937_64 rng(opt.seed);
  VariateGenerator base(*service.dist);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto sample = [&](std::mt19937_64& r) {
    double total = base(r);
    while (unit(r) < p) total += base(r);
    return total;
  };
  const EventLog log = simulate_renewal(sample, rng, opt.mc_horizon_services / out.rate);
  IdcEstimate est = idc_from_events(log, grid);
  if (warnings) warnings->insert(warnings->end(), est.warnings.begin(), est.warnings.end());
  // The estimator is noisy at its last point; pin the asymptote to the exact scv.
  out.idc = IdcCurve(est.curve.grid(), est.curve.values(), out.scv, 1.0);
  out.dist = std::nullopt;
  return out;
}

}  // namespace rqna
