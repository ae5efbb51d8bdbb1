#pragma once

#include <array>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "rqna/rqna.hpp"

namespace rqna::testing {

inline NetworkSpec load_network(const std::string& file) {
  std::ifstream in(std::string(RQNA_NETWORKS_DIR) + "/" + file);
  if (!in) throw std::runtime_error("missing network file " + file);
  return read_network(in);
}

inline NetworkSpec three_station(const std::string& id) { return load_network("three_station_" + id + ".json"); }

inline NetworkModel single_station(const Distribution& arrival, const Distribution& service,
                                   std::span<const double> grid, double feedback = 0.0) {
  NetworkModel m;
  m.routing = Eigen::MatrixXd::Constant(1, 1, feedback);
  m.arrivals.push_back(make_arrival(arrival, grid));
  m.services.push_back(make_service(service, grid));
  return m;
}

/// Random distribution with the given rate: exponential, Erlang, mixed
/// Erlang, balanced H2 or a random three-phase Coxian.
template <class Rng>
Distribution random_distribution(Rng& rng, double rate) {
  std::uniform_int_distribution<int> pick(0, 4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  switch (pick(rng)) {
    case 0: return Distribution::exponential(rate);
    case 1: return Distribution::erlang(2 + static_cast<int>(3 * u(rng)), rate);
    case 2: return Distribution::fit(rate, 0.2 + 0.7 * u(rng));
    case 3: return Distribution::hyperexponential2(rate, 1.5 + 4.0 * u(rng));
    default: {
      Eigen::MatrixXd t = Eigen::MatrixXd::Zero(3, 3);
      for (int r = 0; r < 3; ++r) t(r, r) = -(0.5 + 2.0 * u(rng));
      t(0, 1) = -t(0, 0) * u(rng);
      t(1, 2) = -t(1, 1) * u(rng);
      Eigen::VectorXd alpha(3);
      alpha << 0.6 + 0.4 * u(rng), 0.0, 0.0;
      alpha[1] = 1.0 - alpha[0];
      const PhaseTypeRenewal raw(alpha, t);
      return Distribution::phase_type(PhaseTypeRenewal(alpha, t * (raw.mean() * rate)));
    }
  }
}

/// Sets service rates so that each active station has the requested load.
inline void set_loads(NetworkModel& m, const std::vector<double>& rho, std::span<const double> grid,
                      const std::vector<double>& scv) {
  const int k = m.stations();
  Eigen::VectorXd ext(k);
  for (int i = 0; i < k; ++i) ext[i] = m.arrivals[static_cast<std::size_t>(i)].rate;
  const Eigen::VectorXd lambda = (Eigen::MatrixXd::Identity(k, k) - m.routing.transpose()).partialPivLu().solve(ext);
  for (int i = 0; i < k; ++i) {
    const auto is = static_cast<std::size_t>(i);
    const double mu = lambda[i] > 0.0 ? lambda[i] / rho[is] : 1.0;
    m.services[is] = make_service(Distribution::fit(mu, scv[is]), grid);
  }
}

/// Random feed-forward network with Poisson arrivals and exponential service.
template <class Rng>
NetworkModel random_jackson_feedforward(Rng& rng, int k, std::span<const double> grid) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  NetworkModel m;
  m.routing = Eigen::MatrixXd::Zero(k, k);
  for (int i = 0; i < k; ++i) {
    double budget = 0.3 + 0.65 * u(rng);
    for (int j = i + 1; j < k; ++j) {
      if (u(rng) < 0.6) {
        const double p = budget * u(rng);
        m.routing(i, j) = p;
        budget -= p;
      }
    }
    const bool external = i == 0 || u(rng) < 0.4;
    m.arrivals.push_back(external ? make_arrival(Distribution::exponential(0.2 + u(rng)), grid) : no_arrivals(grid));
    m.services.push_back(make_service(Distribution::exponential(1.0), grid));
  }
  std::vector<double> rho(static_cast<std::size_t>(k)), scv(static_cast<std::size_t>(k), 1.0);
  for (auto& r : rho) r = 0.1 + 0.85 * u(rng);
  set_loads(m, rho, grid, scv);
  return m;
}

/// Random directed tree: every node links to an earlier one, in either
/// direction, with random routing weights and random renewal primitives.
template <class Rng>
NetworkModel random_tree(Rng& rng, int k, std::span<const double> grid) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  NetworkModel m;
  m.routing = Eigen::MatrixXd::Zero(k, k);
  for (int j = 1; j < k; ++j) {
    const int parent = std::uniform_int_distribution<int>(0, j - 1)(rng);
    if (u(rng) < 0.7) {
      m.routing(parent, j) = 1.0;
    } else {
      m.routing(j, parent) = 1.0;
    }
  }
  // Scale each row to a random total below one.
  for (int i = 0; i < k; ++i) {
    const double out = m.routing.row(i).sum();
    if (out == 0.0) continue;
    for (int j = 0; j < k; ++j) m.routing(i, j) *= (0.2 + 0.75 * u(rng)) / out;
    const double row = m.routing.row(i).sum();
    if (row >= 0.95) m.routing.row(i) *= 0.95 / row;
  }
  for (int i = 0; i < k; ++i) {
    const bool source = m.routing.col(i).sum() == 0.0;
    if (source || u(rng) < 0.3) {
      m.arrivals.push_back(make_arrival(random_distribution(rng, 0.2 + u(rng)), grid));
    } else {
      m.arrivals.push_back(no_arrivals(grid));
    }
    m.services.push_back(make_service(Distribution::exponential(1.0), grid));
  }
  Eigen::VectorXd ext(k);
  for (int i = 0; i < k; ++i) ext[i] = m.arrivals[static_cast<std::size_t>(i)].rate;
  const Eigen::VectorXd lambda = (Eigen::MatrixXd::Identity(k, k) - m.routing.transpose()).partialPivLu().solve(ext);
  for (int i = 0; i < k; ++i) {
    const double rho = 0.2 + 0.75 * u(rng);
    m.services[static_cast<std::size_t>(i)] = make_service(random_distribution(rng, lambda[i] / rho), grid);
  }
  return m;
}

// Published values for the three-station cases: plain and elim totals.
struct PublishedTotals {
  const char* id;
  double plain;
  double elim;
  double sim;
};

inline const std::array<PublishedTotals, 20>& published_totals() {
  static const std::array<PublishedTotals, 20> t{{
      {"A1", 83.5, 44.8, 40.39}, {"A2", 94.3, 69.3, 59.58}, {"A3", 74.7, 43.3, 40.72}, {"A4", 75.1, 41.2, 42.12},
      {"B1", 93.7, 53.1, 52.40}, {"B2", 169, 94.5, 91.52},  {"B3", 133, 60.5, 61.68},  {"B4", 135, 62.4, 63.34},
      {"C1", 91.4, 42.1, 44.24}, {"C2", 156, 96.0, 92.42},  {"C3", 84.2, 44.0, 44.26}, {"C4", 91.2, 45.9, 50.20},
      {"D1", 127, 57.6, 55.81},  {"D2", 132, 105, 98.36},   {"D3", 66.6, 47.5, 47.72}, {"D4", 75.5, 54.3, 55.24},
      {"E1", 305, 120, 134.4},   {"E2", 367, 173, 213.1},   {"E3", 300, 136, 138.7},   {"E4", 312, 148, 155.1},
  }};
  return t;
}

// Per-station sojourns for case D: plain, elim, simulation mean and relative half-width.
struct PublishedStation {
  double plain, elim, sim, sim_rel_hw;
};

inline const std::array<std::array<PublishedStation, 4>, 4>& published_case_d() {
  // Entries 0..2 are stations, entry 3 is the total.
  static const std::array<std::array<PublishedStation, 4>, 4> t{{
      {{{2.68, 2.68, 2.476, .0061}, {28.4, 11.1, 10.85, .0321}, {2.53, 2.53, 2.544, .0063}, {127, 57.6, 55.81, .0258}}},
      {{{16.6, 11.3, 11.35, .0329}, {3.06, 3.06, 2.643, .0125}, {36.4, 31.1, 26.87, .0204}, {132, 105, 98.36, .0182}}},
      {{{16.5, 11.3, 11.39, .0304}, {3.04, 2.10, 2.290, .0127}, {2.43, 2.43, 2.220, .0059}, {66.6, 47.5, 47.72, .0251}}},
      {{{16.43, 11.3, 11.30, .0639}, {3.05, 2.10, 2.414, .0112}, {6.85, 5.95, 5.886, .0105}, {75.5, 54.3, 55.24, .0437}}},
  }};
  return t;
}

// Ten-station network: elim column, plain total and simulation column (last entry: total).
inline constexpr std::array<double, 11> kTenStationElim{1.00, 0.56, 2.75, 2.11, 3.35, 0.49, 0.24, 0.59, 0.42, 0.26, 24.2};
inline constexpr std::array<double, 11> kTenStationSim{0.99, 0.55, 2.82, 1.79, 2.92, 0.58, 0.24, 0.58, 0.34, 0.29, 22.0};
inline constexpr double kTenStationPlainTotal = 44.5;

}  // namespace rqna::testing
