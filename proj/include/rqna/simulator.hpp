#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <limits>
#include <optional>
#include <queue>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "rqna/distribution.hpp"
#include "rqna/error.hpp"
#include "rqna/flow_calculus.hpp"
#include "rqna/model.hpp"
#include "rqna/renewal_idc.hpp"

namespace rqna {

/// A stream of the network that can be logged: the external arrivals into a
/// station, the departures from a station, or the transfers i -> j.
struct FlowRef {
  enum class Kind { External, Departure, Transfer };
  Kind kind = Kind::Departure;
  int from = 0;
  int to = 0;

  static FlowRef external(int i) { return {Kind::External, i, i}; }
  static FlowRef departure(int i) { return {Kind::Departure, i, i}; }
  static FlowRef transfer(int i, int j) { return {Kind::Transfer, i, j}; }

  std::string name() const {
    switch (kind) {
      case Kind::External: return "external_" + std::to_string(from + 1);
      case Kind::Departure: return "departure_" + std::to_string(from + 1);
      case Kind::Transfer: return "flow_" + std::to_string(from + 1) + "_" + std::to_string(to + 1);
    }
    return "flow";
  }
};

struct SimConfig {
  double events = 2e6;        // expected station visits per replication, warmup included
  double warmup = 0.2;        // discarded fraction of the horizon
  int replications = 10;
  std::uint64_t seed = 1;
  unsigned threads = 0;       // 0: hardware concurrency
  std::vector<FlowRef> log_flows;  // recorded in the first replication only
};

struct Interval {
  double mean = 0.0;
  double half_width = 0.0;  // 95% t-interval over replication means
};

struct StationEstimate {
  Interval lambda;
  Interval waiting;
  Interval sojourn;
  Interval workload;
  Interval queue;    // mean number waiting
  Interval in_system;
};

struct SimEstimate {
  std::vector<StationEstimate> stations;
  std::vector<std::optional<Interval>> total_by_entry;  // empty where no external arrivals
  Interval total;
  double horizon = 0.0;
  double warmup_time = 0.0;
  int replications = 0;
  std::vector<FlowRef> flows;
  std::vector<EventLog> logs;  // parallel to `flows`
};

namespace detail {

struct SimEvent {
  double t;
  std::uint64_t seq;
  int station;
  bool external;
  int entry;
  double entered;
};

struct LaterEvent {
  bool operator()(const SimEvent& a, const SimEvent& b) const {
    return a.t > b.t || (a.t == b.t && a.seq > b.seq);
  }
};

// Length of [a, b] inside [lo, hi].
inline double overlap(double a, double b, double lo, double hi) {
  return std::max(0.0, std::min(b, hi) - std::max(a, lo));
}

// Integral over [a, b] of max(free - s, 0), clipped to [lo, hi].
inline double work_integral(double a, double b, double free, double lo, double hi) {
  a = std::max(a, lo);
  b = std::min(std::min(b, hi), free);
  if (b <= a) return 0.0;
  return (b - a) * (free - 0.5 * (a + b));
}

struct RepStats {
  std::vector<double> lambda, waiting, sojourn, workload, queue, in_system;
  std::vector<double> total_by_entry;
  std::vector<bool> has_entry;
  double total = 0.0;
  std::vector<EventLog> logs;
};

inline RepStats run_replication(const NetworkModel& model, const std::vector<Distribution>& svc,
                                const std::vector<std::optional<Distribution>>& ext, double horizon, double warm,
                                std::uint64_t seed, int rep, const std::vector<FlowRef>& flows) {
  const int k = model.stations();
  const auto ks = static_cast<std::size_t>(k);
  std::seed_seq seq_init{seed, static_cast<std::uint64_t>(rep), std::uint64_t{0x5eed}};
  std::mt19937_64 rng(seq_init);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<VariateGenerator> service;
  std::vector<std::optional<VariateGenerator>> arrival(ks);
  for (int i = 0; i < k; ++i) {
    service.emplace_back(svc[static_cast<std::size_t>(i)]);
    if (ext[static_cast<std::size_t>(i)]) arrival[static_cast<std::size_t>(i)].emplace(*ext[static_cast<std::size_t>(i)]);
  }

  std::priority_queue<SimEvent, std::vector<SimEvent>, LaterEvent> heap;
  std::uint64_t next_seq = 0;
  for (int i = 0; i < k; ++i) {
    if (auto& g = arrival[static_cast<std::size_t>(i)]) {
      const double t = (*g)(rng);
      heap.push({t, next_seq++, i, true, i, t});
    }
  }

  std::vector<double> free(ks, 0.0), last(ks, 0.0);
  std::vector<double> n_visits(ks, 0.0), sum_wait(ks, 0.0), sum_sojourn(ks, 0.0);
  std::vector<double> int_work(ks, 0.0), int_queue(ks, 0.0), int_system(ks, 0.0);
  std::vector<double> n_total(ks, 0.0), sum_total(ks, 0.0);

  RepStats out;
  out.logs.resize(flows.size());
  for (auto& log : out.logs) log.horizon = horizon - warm;
  auto record = [&](FlowRef::Kind kind, int from, int to, double t) {
    if (t < warm || t > horizon) return;
    for (std::size_t f = 0; f < flows.size(); ++f) {
      const FlowRef& r = flows[f];
      if (r.kind == kind && r.from == from && (kind != FlowRef::Kind::Transfer || r.to == to)) {
        out.logs[f].times.push_back(t - warm);
      }
    }
  };

  while (!heap.empty()) {
    const SimEvent ev = heap.top();
    heap.pop();
    const int i = ev.station;
    const auto is = static_cast<std::size_t>(i);
    if (ev.external) {
      record(FlowRef::Kind::External, i, i, ev.t);
      // External arrivals stop at the horizon; customers already inside run to completion.
      auto& g = *arrival[is];
      const double next = ev.t + g(rng);
      if (next <= horizon) heap.push({next, next_seq++, i, true, i, next});
    }

    const double s = service[is](rng);
    int_work[is] += work_integral(last[is], ev.t, free[is], warm, horizon);
    last[is] = ev.t;
    const double start = std::max(ev.t, free[is]);
    const double dep = start + s;
    free[is] = dep;
    if (ev.t >= warm && ev.t <= horizon) {
      n_visits[is] += 1.0;
      sum_wait[is] += start - ev.t;
      sum_sojourn[is] += dep - ev.t;
    }
    int_queue[is] += overlap(ev.t, start, warm, horizon);
    int_system[is] += overlap(ev.t, dep, warm, horizon);
    record(FlowRef::Kind::Departure, i, i, dep);

    double u = unit(rng);
    int next_station = -1;
    for (int j = 0; j < k; ++j) {
      u -= model.routing(i, j);
      if (u < 0.0) {
        next_station = j;
        break;
      }
    }
    if (next_station >= 0) {
      record(FlowRef::Kind::Transfer, i, next_station, dep);
      heap.push({dep, next_seq++, next_station, false, ev.entry, ev.entered});
    } else if (ev.entered >= warm && ev.entered <= horizon) {
      const auto e = static_cast<std::size_t>(ev.entry);
      n_total[e] += 1.0;
      sum_total[e] += dep - ev.entered;
    }
  }
  for (int i = 0; i < k; ++i) {
    const auto is = static_cast<std::size_t>(i);
    int_work[is] += work_integral(last[is], horizon, free[is], warm, horizon);
  }

  const double len = horizon - warm;
  double all_n = 0.0;
  double all_sum = 0.0;
  for (std::size_t i = 0; i < ks; ++i) {
    out.lambda.push_back(n_visits[i] / len);
    out.waiting.push_back(n_visits[i] > 0.0 ? sum_wait[i] / n_visits[i] : 0.0);
    out.sojourn.push_back(n_visits[i] > 0.0 ? sum_sojourn[i] / n_visits[i] : 0.0);
    out.workload.push_back(int_work[i] / len);
    out.queue.push_back(int_queue[i] / len);
    out.in_system.push_back(int_system[i] / len);
    out.has_entry.push_back(n_total[i] > 0.0);
    out.total_by_entry.push_back(n_total[i] > 0.0 ? sum_total[i] / n_total[i] : 0.0);
    all_n += n_total[i];
    all_sum += sum_total[i];
  }
  out.total = all_n > 0.0 ? all_sum / all_n : 0.0;
  for (auto& log : out.logs) {
    std::sort(log.times.begin(), log.times.end());
  }
  return out;
}

inline Interval confidence_interval(const std::vector<double>& xs) {
  Interval ci;
  const auto n = xs.size();
  if (n == 0) return ci;
  for (double x : xs) ci.mean += x;
  ci.mean /= static_cast<double>(n);
  if (n < 2) {
    ci.half_width = std::numeric_limits<double>::infinity();
    return ci;
  }
  double ss = 0.0;
  for (double x : xs) ss += (x - ci.mean) * (x - ci.mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  const boost::math::students_t dist(static_cast<double>(n - 1));
  ci.half_width = boost::math::quantile(boost::math::complement(dist, 0.025)) * sd / std::sqrt(static_cast<double>(n));
  return ci;
}

}  // namespace detail

/// Discrete-event simulation of the network: FCFS single servers, service
/// times drawn on arrival, Markovian routing. Replications are independent
/// and seeded from (seed, replication), so results do not depend on the
/// number of threads.
inline SimEstimate simulate(const NetworkModel& model, const SimConfig& config = {}) {
  validate(model);
  if (!(config.warmup >= 0.0) || config.warmup > 0.5) {
    throw Error(ErrorCode::InvalidArgument, "warmup fraction must lie in [0, 0.5]");
  }
  if (config.replications < 1) throw Error(ErrorCode::InvalidArgument, "need at least one replication");
  if (!(config.events > 0.0)) throw Error(ErrorCode::InvalidArgument, "event budget must be positive");
  const RateSolution rates = solve_traffic_rates(model);
  const int k = model.stations();

  std::vector<Distribution> svc;
  std::vector<std::optional<Distribution>> ext(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    const ServiceSpec& s = model.services[static_cast<std::size_t>(i)];
    if (!s.dist || !s.dist->generative()) {
      throw Error(ErrorCode::UnknownDistributionTag,
                  "service at station " + std::to_string(i + 1) + " has no distribution to sample from");
    }
    svc.push_back(*s.dist);
    const ArrivalSpec& a = model.arrivals[static_cast<std::size_t>(i)];
    if (a.rate > 0.0) {
      if (!a.dist || !a.dist->generative()) {
        throw Error(ErrorCode::UnknownDistributionTag,
                    "external arrivals at station " + std::to_string(i + 1) + " have no distribution to sample from");
      }
      ext[static_cast<std::size_t>(i)] = a.dist;
    }
  }
  for (const FlowRef& f : config.log_flows) {
    if (f.from < 0 || f.from >= k || f.to < 0 || f.to >= k) {
      throw Error(ErrorCode::InvalidArgument, "logged flow refers to a missing station");
    }
  }

  SimEstimate est;
  est.horizon = config.events / rates.lambda.sum();
  est.warmup_time = config.warmup * est.horizon;
  est.replications = config.replications;
  est.flows = config.log_flows;

  const unsigned hw = config.threads > 0 ? config.threads : std::max(1u, std::thread::hardware_concurrency());
  std::vector<detail::RepStats> reps(static_cast<std::size_t>(config.replications));
  for (int first = 0; first < config.replications; first += static_cast<int>(hw)) {
    std::vector<std::future<detail::RepStats>> batch;
    const int last = std::min(config.replications, first + static_cast<int>(hw));
    for (int r = first; r < last; ++r) {
      const std::vector<FlowRef> flows = r == 0 ? config.log_flows : std::vector<FlowRef>{};
      batch.push_back(std::async(std::launch::async, [&, r, flows] {
        return detail::run_replication(model, svc, ext, est.horizon, est.warmup_time, config.seed, r, flows);
      }));
    }
    for (int r = first; r < last; ++r) reps[static_cast<std::size_t>(r)] = batch[static_cast<std::size_t>(r - first)].get();
  }

  auto gather = [&](auto member, std::size_t i) {
    std::vector<double> xs;
    for (const auto& r : reps) xs.push_back((r.*member)[i]);
    return detail::confidence_interval(xs);
  };
  for (std::size_t i = 0; i < static_cast<std::size_t>(k); ++i) {
    StationEstimate s;
    s.lambda = gather(&detail::RepStats::lambda, i);
    s.waiting = gather(&detail::RepStats::waiting, i);
    s.sojourn = gather(&detail::RepStats::sojourn, i);
    s.workload = gather(&detail::RepStats::workload, i);
    s.queue = gather(&detail::RepStats::queue, i);
    s.in_system = gather(&detail::RepStats::in_system, i);
    est.stations.push_back(s);
    if (rates.external[static_cast<Eigen::Index>(i)] > 0.0) {
      est.total_by_entry.push_back(gather(&detail::RepStats::total_by_entry, i));
    } else {
      est.total_by_entry.emplace_back();
    }
  }
  std::vector<double> totals;
  for (const auto& r : reps) totals.push_back(r.total);
  est.total = detail::confidence_interval(totals);
  est.logs = std::move(reps.front().logs);
  return est;
}

/// Timestamp logs of the selected flows over the post-warmup horizon of one run.
inline std::vector<EventLog> log_flows(const NetworkModel& model, SimConfig config, const std::vector<FlowRef>& flows) {
  config.replications = 1;
  config.log_flows = flows;
  return simulate(model, config).logs;
}

}  // namespace rqna
