#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rqna/error.hpp"
#include "rqna/idc_curve.hpp"
#include "rqna/model.hpp"
#include "rqna/weights.hpp"

namespace rqna {

struct RateSolution {
  Eigen::VectorXd external;  // lambda_0
  Eigen::VectorXd lambda;
  Eigen::VectorXd rho;
  Eigen::MatrixXd flow;     // lambda_i p_ij
  Eigen::MatrixXd visits;   // (I - P)^{-1}
  Eigen::MatrixXd routing;
  double residual = 0.0;

  int stations() const noexcept { return static_cast<int>(lambda.size()); }
  bool active(int i) const { return lambda[i] > 0.0; }
  bool active_flow(int i, int j) const { return flow(i, j) > 0.0; }
};

/// Solves lambda = lambda_0 + P' lambda. Throws Unstable if any rho_i >= 1.
inline RateSolution solve_traffic_rates(const NetworkModel& model) {
  const int k = model.stations();
  RateSolution r;
  r.routing = model.routing;
  r.external.resize(k);
  Eigen::VectorXd mu(k);
  for (int i = 0; i < k; ++i) {
    r.external[i] = model.arrivals[i].rate;
    mu[i] = model.services[i].rate;
  }
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(k, k);
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(id - model.routing.transpose());
  r.lambda = lu.solve(r.external);
  for (int i = 0; i < k; ++i) r.lambda[i] = std::max(r.lambda[i], 0.0);
  r.residual = (r.lambda - r.external - model.routing.transpose() * r.lambda).cwiseAbs().maxCoeff();
  r.visits = (id - model.routing).partialPivLu().inverse();
  r.rho = r.lambda.cwiseQuotient(mu);
  r.flow = r.lambda.asDiagonal() * model.routing;

  std::string unstable;
  for (int i = 0; i < k; ++i) {
    if (!(r.rho[i] < 1.0)) {
      unstable += (unstable.empty() ? "" : ", ") + std::to_string(i + 1) + " (rho = " + std::to_string(r.rho[i]) + ")";
    }
  }
  if (!unstable.empty()) throw Error(ErrorCode::Unstable, "stations " + unstable);
  return r;
}

/// w_i(t) = w*((1 - rho_i)^2 lambda_i t / (rho_i c_x^2)). A nonpositive c_x^2
/// degenerates to the indicator of t > 0 and sets *degenerate.
inline double station_weight(int i, const RateSolution& rates, double cx2, double t, bool* degenerate = nullptr) {
  if (t <= 0.0) return 0.0;
  const double rho = rates.rho[i];
  if (!(cx2 > 0.0)) {
    if (degenerate) *degenerate = true;
    return 1.0;
  }
  if (!(rho > 0.0)) return 1.0;
  return w_star((1.0 - rho) * (1.0 - rho) * rates.lambda[i] * t / (rho * cx2));
}

/// I_d(t) = w_i(t) I_a(t) + (1 - w_i(t)) I_s(rho_i t) on the grid of I_a.
inline IdcCurve departure_idc(int i, const IdcCurve& arrival, const IdcCurve& service, const RateSolution& rates,
                              double cx2) {
  const double rho = rates.rho[i];
  std::vector<double> values;
  values.reserve(arrival.grid().size());
  for (double t : arrival.grid()) {
    const double w = station_weight(i, rates, cx2, t);
    values.push_back(w * arrival(t) + (1.0 - w) * service(rho * t));
  }
  return IdcCurve(arrival.grid(), std::move(values), arrival.asymptote(), service.value_at_zero());
}

/// Visits to i of a customer that has just been routed i -> j, i.e. the (i,j)
/// entry of (I - P')^{-1}. Zero whenever j cannot lead back to i.
inline double return_visits(const RateSolution& rates, int i, int j) { return rates.visits(j, i); }

/// Limit of the splitting correction.
///   Printed:    2 xi_ij p (1 - p), xi = (I - P')^{-1}.
///   Covariance: 2 p (xi_ij - xi_ii + 1), twice the covariance between one
///               routing decision at i and the later departures from i. The
///               two agree when the only alternative to j is leaving.
enum class SplittingCorrection { Printed, Covariance };

inline double splitting_alpha_limit(int i, int j, const RateSolution& rates,
                                    SplittingCorrection form = SplittingCorrection::Printed) {
  const double p = rates.routing(i, j);
  if (form == SplittingCorrection::Covariance) return 2.0 * p * (return_visits(rates, i, j) - rates.visits(i, i) + 1.0);
  return 2.0 * return_visits(rates, i, j) * p * (1.0 - p);
}

inline double splitting_alpha(int i, int j, const RateSolution& rates, double cx2, double t,
                              SplittingCorrection form = SplittingCorrection::Printed) {
  return splitting_alpha_limit(i, j, rates, form) * station_weight(i, rates, cx2, t);
}

/// zeta[i](j, k) for contributors j != k into station i; the diagonal is zero.
struct ZetaTensor {
  std::vector<Eigen::MatrixXd> by_station;

  const Eigen::MatrixXd& at(int i) const { return by_station[static_cast<std::size_t>(i)]; }
  double operator()(int j, int i, int k) const { return by_station[static_cast<std::size_t>(i)](j, k); }
};

/// Covariance constants of the inbound flows to each station:
///   zeta_{j,i;k,i} = nu_j' (C_0 + sum_l Sigma_l) nu_k + nu_k' Sigma_j e_i + nu_j' Sigma_k e_i,
/// nu_j = p_{j,i} e_j' (I - P')^{-1}, C_0 = diag(c_{a,0,m}^2 lambda_{0,m}) and
/// Sigma_l the covariance of the routing decisions at l.
inline ZetaTensor zeta_tensor(const NetworkModel& model, const RateSolution& rates) {
  const int k = model.stations();
  const Eigen::MatrixXd& p = model.routing;
  const Eigen::MatrixXd vt = rates.visits.transpose();  // (I - P')^{-1}

  std::vector<Eigen::MatrixXd> sigma(static_cast<std::size_t>(k));
  Eigen::MatrixXd total = Eigen::MatrixXd::Zero(k, k);
  for (int l = 0; l < k; ++l) {
    const Eigen::VectorXd row = p.row(l).transpose();
    Eigen::MatrixXd s = -rates.lambda[l] * row * row.transpose();
    s.diagonal() += rates.lambda[l] * row;
    total += s;
    sigma[static_cast<std::size_t>(l)] = std::move(s);
  }
  for (int m = 0; m < k; ++m) {
    total(m, m) += model.arrivals[m].idc.asymptote() * rates.external[m];
  }

  ZetaTensor z;
  z.by_station.assign(static_cast<std::size_t>(k), Eigen::MatrixXd::Zero(k, k));
  for (int i = 0; i < k; ++i) {
    Eigen::MatrixXd nu(k, k);  // column j is nu_j
    for (int j = 0; j < k; ++j) nu.col(j) = p(j, i) * vt.row(j).transpose();
    const Eigen::MatrixXd quad = nu.transpose() * total * nu;
    Eigen::MatrixXd cross(k, k);  // cross(j, k) = nu_k' Sigma_j e_i
    for (int j = 0; j < k; ++j) cross.row(j) = (nu.transpose() * sigma[static_cast<std::size_t>(j)].col(i)).transpose();
    Eigen::MatrixXd& out = z.by_station[static_cast<std::size_t>(i)];
    for (int j = 0; j < k; ++j) {
      for (int l = j + 1; l < k; ++l) {
        if (p(j, i) == 0.0 || p(l, i) == 0.0) continue;
        const double v = 0.5 * (quad(j, l) + quad(l, j)) + cross(j, l) + cross(l, j);
        out(j, l) = v;
        out(l, j) = v;
      }
    }
  }
  return z;
}

struct VariabilityParams {
  Eigen::VectorXd ca2;       // c_{a,i}^2
  Eigen::VectorXd cd2;       // c_{d,i}^2
  Eigen::MatrixXd ca2_flow;  // c_{a,i,j}^2, zero for absent flows
  Eigen::MatrixXd alpha2;    // c_{alpha,i,j}^2
  Eigen::VectorXd beta2;     // c_{beta,i}^2
  Eigen::VectorXd cs2;
  Eigen::VectorXd cx2;       // c_{a,i}^2 + c_{s,i}^2
  double residual = 0.0;
};

namespace detail {

// Contributor whose parameters index the weight of the (j, k) pair.
inline int heavier(const RateSolution& rates, int j, int k) {
  if (rates.rho[j] > rates.rho[k]) return j;
  if (rates.rho[k] > rates.rho[j]) return k;
  return std::min(j, k);
}

inline double pair_cx2(const NetworkModel& model, const VariabilityParams& params, int j, int i) {
  const double p = model.routing(j, i);
  return p * params.ca2[j] + (1.0 - p) + p * model.services[j].scv;
}

}  // namespace detail

/// beta_i(t) = sum_{j != k} (zeta_{j,i;k,i} / lambda_i) w*((1 - rho_m)^2 p_{m,i} lambda_m t / (rho_m c_{x,m,i}^2)),
/// m the more heavily loaded of j and k. When the receiver i is loaded more
/// heavily than both, its own weight w_i(t) is used instead.
inline double superposition_beta(const NetworkModel& model, int i, const RateSolution& rates,
                                 const VariabilityParams& params, const ZetaTensor& zeta, double t) {
  if (!rates.active(i)) return 0.0;
  const int k = rates.stations();
  const Eigen::MatrixXd& z = zeta.at(i);
  double sum = 0.0;
  for (int j = 0; j < k; ++j) {
    for (int l = j + 1; l < k; ++l) {
      if (z(j, l) == 0.0) continue;
      double w = 1.0;
      if (!std::isinf(t)) {
        const int m = detail::heavier(rates, j, l);
        const double cx2 = detail::pair_cx2(model, params, m, i);
        const double rho = rates.rho[m];
        if (t <= 0.0) {
          w = 0.0;
        } else if (rates.rho[i] > rho) {
          // The receiving station is the most heavily loaded of the three.
          w = station_weight(i, rates, params.cx2[i], t);
        } else if (cx2 > 0.0 && rho > 0.0) {
          w = w_star((1.0 - rho) * (1.0 - rho) * model.routing(m, i) * rates.lambda[m] * t / (rho * cx2));
        }
      }
      sum += 2.0 * z(j, l) / rates.lambda[i] * w;
    }
  }
  return sum;
}

/// Inputs of one instance of (E - M) I = b.
struct SystemTerms {
  Eigen::VectorXd w;         // departure weights
  Eigen::MatrixXd alpha;     // splitting corrections
  Eigen::VectorXd beta;      // superposition corrections
  Eigen::VectorXd external;  // I_{a,0,i}
  Eigen::VectorXd service;   // I_{s,i}(rho_i t)
};

struct SystemSolution {
  Eigen::VectorXd a;
  Eigen::MatrixXd f;
  Eigen::VectorXd d;
  double residual = 0.0;
  double rcond = 1.0;
};

struct SolverOptions {
  std::size_t reduce_above = 400;  // dimension above which the K x K reduction is used
  bool force_reduced = false;
  double min_rcond = 1e-13;
  SplittingCorrection splitting = SplittingCorrection::Printed;
};

namespace detail {

// Unknown indices of the active part of the system.
struct Layout {
  std::vector<int> a;                 // -1 when inactive
  std::vector<int> d;
  std::vector<std::vector<int>> f;    // -1 when the flow is absent
  int dim = 0;

  explicit Layout(const RateSolution& rates) {
    const int k = rates.stations();
    a.assign(k, -1);
    d.assign(k, -1);
    f.assign(k, std::vector<int>(k, -1));
    for (int i = 0; i < k; ++i) {
      if (rates.active(i)) a[i] = dim++;
    }
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) {
        if (rates.active_flow(i, j)) f[i][j] = dim++;
      }
    }
    for (int i = 0; i < k; ++i) {
      if (rates.active(i)) d[i] = dim++;
    }
  }
};

inline double system_residual(const RateSolution& rates, const SystemTerms& s, const SystemSolution& x) {
  const int k = rates.stations();
  double worst = 0.0;
  for (int i = 0; i < k; ++i) {
    if (!rates.active(i)) continue;
    double rhs = rates.external[i] / rates.lambda[i] * s.external[i] + s.beta[i];
    for (int j = 0; j < k; ++j) {
      if (rates.active_flow(j, i)) rhs += rates.flow(j, i) / rates.lambda[i] * x.f(j, i);
    }
    worst = std::max(worst, std::abs(x.a[i] - rhs));
    worst = std::max(worst, std::abs(x.d[i] - s.w[i] * x.a[i] - (1.0 - s.w[i]) * s.service[i]));
    for (int j = 0; j < k; ++j) {
      if (!rates.active_flow(i, j)) continue;
      const double p = rates.routing(i, j);
      worst = std::max(worst, std::abs(x.f(i, j) - p * x.d[i] - (1.0 - p) - s.alpha(i, j)));
    }
  }
  return worst;
}

inline void back_substitute(const RateSolution& rates, const SystemTerms& s, SystemSolution& x) {
  const int k = rates.stations();
  for (int i = 0; i < k; ++i) {
    if (!rates.active(i)) continue;
    x.d[i] = s.w[i] * x.a[i] + (1.0 - s.w[i]) * s.service[i];
    for (int j = 0; j < k; ++j) {
      if (!rates.active_flow(i, j)) continue;
      const double p = rates.routing(i, j);
      x.f(i, j) = p * x.d[i] + (1.0 - p) + s.alpha(i, j);
    }
  }
}

}  // namespace detail

/// Solves (E - M) I = b for one set of terms. Inactive stations and absent
/// flows keep the value 1.
inline SystemSolution solve_idc_system(const RateSolution& rates, const SystemTerms& s,
                                       const SolverOptions& opt = {}) {
  const int k = rates.stations();
  const detail::Layout layout(rates);
  SystemSolution x;
  x.a = Eigen::VectorXd::Ones(k);
  x.d = Eigen::VectorXd::Ones(k);
  x.f = Eigen::MatrixXd::Ones(k, k);

  if (opt.force_reduced || static_cast<std::size_t>(layout.dim) > opt.reduce_above) {
    // Substitute the flow and departure equations into the arrival equations.
    std::vector<int> idx;
    for (int i = 0; i < k; ++i) {
      if (rates.active(i)) idx.push_back(i);
    }
    const auto n = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd b(n);
    for (Eigen::Index r = 0; r < n; ++r) {
      const int i = idx[static_cast<std::size_t>(r)];
      b[r] = rates.external[i] / rates.lambda[i] * s.external[i] + s.beta[i];
      for (Eigen::Index c = 0; c < n; ++c) {
        const int j = idx[static_cast<std::size_t>(c)];
        if (!rates.active_flow(j, i)) continue;
        const double share = rates.flow(j, i) / rates.lambda[i];
        const double p = rates.routing(j, i);
        a(r, c) -= share * p * s.w[j];
        b[r] += share * (p * (1.0 - s.w[j]) * s.service[j] + (1.0 - p) + s.alpha(j, i));
      }
    }
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
    x.rcond = lu.rcond();
    if (!(x.rcond > opt.min_rcond)) throw Error(ErrorCode::SingularSystem, "reduced IDC system is singular");
    const Eigen::VectorXd sol = lu.solve(b);
    for (Eigen::Index r = 0; r < n; ++r) x.a[idx[static_cast<std::size_t>(r)]] = sol[r];
    detail::back_substitute(rates, s, x);
    x.residual = detail::system_residual(rates, s, x);
    return x;
  }

  const int dim = layout.dim;
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(dim, dim);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(dim);
  for (int i = 0; i < k; ++i) {
    if (!rates.active(i)) continue;
    const int ai = layout.a[i];
    const int di = layout.d[i];
    b[ai] = rates.external[i] / rates.lambda[i] * s.external[i] + s.beta[i];
    for (int j = 0; j < k; ++j) {
      if (rates.active_flow(j, i)) m(ai, layout.f[j][i]) -= rates.flow(j, i) / rates.lambda[i];
    }
    for (int j = 0; j < k; ++j) {
      const int fij = layout.f[i][j];
      if (fij < 0) continue;
      const double p = rates.routing(i, j);
      m(fij, di) -= p;
      b[fij] = (1.0 - p) + s.alpha(i, j);
    }
    m(di, ai) -= s.w[i];
    b[di] = (1.0 - s.w[i]) * s.service[i];
  }
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
  x.rcond = lu.rcond();
  if (!(x.rcond > opt.min_rcond)) throw Error(ErrorCode::SingularSystem, "IDC system is singular");
  const Eigen::VectorXd sol = lu.solve(b);
  for (int i = 0; i < k; ++i) {
    if (!rates.active(i)) continue;
    x.a[i] = sol[layout.a[i]];
    x.d[i] = sol[layout.d[i]];
    for (int j = 0; j < k; ++j) {
      if (layout.f[i][j] >= 0) x.f(i, j) = sol[layout.f[i][j]];
    }
  }
  x.residual = detail::system_residual(rates, s, x);
  return x;
}

/// Limiting system (E - M(inf)) c^2 = b(inf).
inline VariabilityParams solve_limiting_variability(const NetworkModel& model, const RateSolution& rates,
                                                    const ZetaTensor& zeta, const SolverOptions& opt = {}) {
  const int k = model.stations();
  VariabilityParams v;
  v.cs2.resize(k);
  for (int i = 0; i < k; ++i) v.cs2[i] = model.services[i].scv;
  v.alpha2 = Eigen::MatrixXd::Zero(k, k);
  v.beta2 = Eigen::VectorXd::Zero(k);
  for (int i = 0; i < k; ++i) {
    if (rates.active(i)) v.beta2[i] = 2.0 * zeta.at(i).triangularView<Eigen::StrictlyUpper>().toDenseMatrix().sum() / rates.lambda[i];
    for (int j = 0; j < k; ++j) {
      if (rates.active_flow(i, j)) v.alpha2(i, j) = splitting_alpha_limit(i, j, rates, opt.splitting);
    }
  }
  SystemTerms s;
  s.w = Eigen::VectorXd::Ones(k);
  s.alpha = v.alpha2;
  s.beta = v.beta2;
  s.external.resize(k);
  for (int i = 0; i < k; ++i) s.external[i] = model.arrivals[i].idc.asymptote();
  s.service = Eigen::VectorXd::Zero(k);
  const SystemSolution x = solve_idc_system(rates, s, opt);
  v.ca2 = x.a;
  v.cd2 = x.d;
  v.ca2_flow = Eigen::MatrixXd::Zero(k, k);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      if (rates.active_flow(i, j)) v.ca2_flow(i, j) = x.f(i, j);
    }
  }
  v.cx2 = v.ca2 + v.cs2;
  v.residual = x.residual;
  return v;
}

struct FlowSolution {
  RateSolution rates;
  VariabilityParams params;
  ZetaTensor zeta;
  std::vector<double> grid;
  std::vector<IdcCurve> arrival;                          // I_{a,i}
  std::vector<IdcCurve> departure;                        // I_{d,i}
  std::vector<std::vector<std::optional<IdcCurve>>> flow; // I_{a,i,j}; empty when lambda_ij = 0
  double max_residual = 0.0;
  double min_rcond = 1.0;
  std::vector<std::string> warnings;
};

namespace detail {

inline SystemTerms terms_at(const NetworkModel& model, const RateSolution& rates, const VariabilityParams& params,
                            const ZetaTensor& zeta, double t, bool with_corrections, bool* degenerate) {
  const int k = model.stations();
  SystemTerms s;
  s.w.resize(k);
  s.beta = Eigen::VectorXd::Zero(k);
  s.alpha = Eigen::MatrixXd::Zero(k, k);
  s.external.resize(k);
  s.service.resize(k);
  for (int i = 0; i < k; ++i) {
    s.w[i] = station_weight(i, rates, params.cx2[i], t, degenerate);
    s.external[i] = model.arrivals[i].idc(t);
    s.service[i] = model.services[i].idc(rates.rho[i] * t);
  }
  if (with_corrections) {
    for (int i = 0; i < k; ++i) {
      s.beta[i] = superposition_beta(model, i, rates, params, zeta, t);
      for (int j = 0; j < k; ++j) {
        if (rates.active_flow(i, j)) s.alpha(i, j) = params.alpha2(i, j) * s.w[i];
      }
    }
  }
  return s;
}

inline void collect(FlowSolution& out, const std::vector<SystemSolution>& per_t, const SystemSolution& at_zero) {
  const int k = out.rates.stations();
  const std::size_t n = out.grid.size();
  out.arrival.clear();
  out.departure.clear();
  out.flow.assign(static_cast<std::size_t>(k), std::vector<std::optional<IdcCurve>>(static_cast<std::size_t>(k)));
  for (int i = 0; i < k; ++i) {
    std::vector<double> a(n), d(n);
    for (std::size_t g = 0; g < n; ++g) {
      a[g] = std::max(per_t[g].a[i], 0.0);
      d[g] = std::max(per_t[g].d[i], 0.0);
    }
    const bool on = out.rates.active(i);
    out.arrival.emplace_back(out.grid, std::move(a), on ? std::max(out.params.ca2[i], 0.0) : 1.0,
                             std::max(at_zero.a[i], 0.0));
    out.departure.emplace_back(out.grid, std::move(d), on ? std::max(out.params.cd2[i], 0.0) : 1.0,
                               std::max(at_zero.d[i], 0.0));
    for (int j = 0; j < k; ++j) {
      if (!out.rates.active_flow(i, j)) continue;
      std::vector<double> f(n);
      for (std::size_t g = 0; g < n; ++g) f[g] = std::max(per_t[g].f(i, j), 0.0);
      out.flow[i][j] = IdcCurve(out.grid, std::move(f), std::max(out.params.ca2_flow(i, j), 0.0),
                                std::max(at_zero.f(i, j), 0.0));
    }
  }
}

}  // namespace detail

/// Solves the time-indexed IDC equations at every grid point, plus the limits
/// at 0+ (all weights 0) and infinity (the limiting variability system).
inline FlowSolution assemble_and_solve_idc(const NetworkModel& model, const RateSolution& rates,
                                           const VariabilityParams& params, const ZetaTensor& zeta,
                                           std::span<const double> grid, const SolverOptions& opt = {}) {
  FlowSolution out;
  out.rates = rates;
  out.params = params;
  out.zeta = zeta;
  out.grid.assign(grid.begin(), grid.end());
  bool degenerate = false;
  std::vector<SystemSolution> per_t;
  per_t.reserve(grid.size());
  for (double t : grid) {
    per_t.push_back(solve_idc_system(rates, detail::terms_at(model, rates, params, zeta, t, true, &degenerate), opt));
    out.max_residual = std::max(out.max_residual, per_t.back().residual);
    out.min_rcond = std::min(out.min_rcond, per_t.back().rcond);
  }
  const SystemSolution zero = solve_idc_system(rates, detail::terms_at(model, rates, params, zeta, 0.0, true, nullptr), opt);
  if (degenerate) out.warnings.push_back("a station has c_x^2 = 0; its weight is the indicator of t > 0");
  detail::collect(out, per_t, zero);
  return out;
}

/// rates -> zeta -> limiting variability -> time-indexed systems.
inline FlowSolution solve_flows(const NetworkModel& model, std::span<const double> grid, const SolverOptions& opt = {}) {
  validate(model);
  const RateSolution rates = solve_traffic_rates(model);
  const ZetaTensor zeta = zeta_tensor(model, rates);
  const VariabilityParams params = solve_limiting_variability(model, rates, zeta, opt);
  return assemble_and_solve_idc(model, rates, params, zeta, grid, opt);
}

/// Topological order of a network whose routing graph is a directed forest
/// (no self-loops, no undirected cycles). Throws NotATree otherwise.
inline std::vector<int> tree_order(const Eigen::MatrixXd& routing) {
  const int k = static_cast<int>(routing.rows());
  std::vector<int> parent(static_cast<std::size_t>(k));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::vector<int> indegree(static_cast<std::size_t>(k), 0);
  for (int i = 0; i < k; ++i) {
    if (routing(i, i) > 0.0) throw Error(ErrorCode::NotATree, "station " + std::to_string(i + 1) + " feeds itself");
    for (int j = i + 1; j < k; ++j) {
      if (routing(i, j) <= 0.0 && routing(j, i) <= 0.0) continue;
      if (routing(i, j) > 0.0 && routing(j, i) > 0.0) {
        throw Error(ErrorCode::NotATree, "stations " + std::to_string(i + 1) + " and " + std::to_string(j + 1) + " form a cycle");
      }
      const int a = find(i);
      const int b = find(j);
      if (a == b) throw Error(ErrorCode::NotATree, "routing graph contains an undirected cycle");
      parent[a] = b;
    }
  }
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      if (routing(i, j) > 0.0) ++indegree[j];
    }
  }
  std::vector<int> order;
  std::queue<int> ready;
  for (int i = 0; i < k; ++i) {
    if (indegree[i] == 0) ready.push(i);
  }
  while (!ready.empty()) {
    const int i = ready.front();
    ready.pop();
    order.push_back(i);
    for (int j = 0; j < k; ++j) {
      if (routing(i, j) > 0.0 && --indegree[j] == 0) ready.push(j);
    }
  }
  return order;
}

/// Forward substitution for tree networks: no corrections, each arrival IDC
/// depends only on upstream stations.
inline FlowSolution tree_rqna(const NetworkModel& model, const RateSolution& rates, std::span<const double> grid) {
  const std::vector<int> order = tree_order(model.routing);
  const int k = model.stations();
  FlowSolution out;
  out.rates = rates;
  out.grid.assign(grid.begin(), grid.end());
  out.zeta.by_station.assign(static_cast<std::size_t>(k), Eigen::MatrixXd::Zero(k, k));

  VariabilityParams& v = out.params;
  v.cs2.resize(k);
  for (int i = 0; i < k; ++i) v.cs2[i] = model.services[i].scv;
  v.alpha2 = Eigen::MatrixXd::Zero(k, k);
  v.beta2 = Eigen::VectorXd::Zero(k);
  v.ca2 = Eigen::VectorXd::Ones(k);
  v.ca2_flow = Eigen::MatrixXd::Zero(k, k);

  // One pass computes the limits, then one pass per time point.
  auto sweep = [&](const SystemTerms& s, SystemSolution& x, bool limits) {
    for (int i : order) {
      if (!rates.active(i)) continue;
      double a = rates.external[i] / rates.lambda[i] * s.external[i];
      for (int j = 0; j < k; ++j) {
        if (rates.active_flow(j, i)) a += rates.flow(j, i) / rates.lambda[i] * x.f(j, i);
      }
      x.a[i] = a;
      const double w = limits ? 1.0 : s.w[i];
      x.d[i] = w * a + (1.0 - w) * s.service[i];
      for (int j = 0; j < k; ++j) {
        if (!rates.active_flow(i, j)) continue;
        const double p = rates.routing(i, j);
        x.f(i, j) = p * x.d[i] + (1.0 - p);
      }
    }
  };
  auto blank = [&] {
    SystemSolution x;
    x.a = Eigen::VectorXd::Ones(k);
    x.d = Eigen::VectorXd::Ones(k);
    x.f = Eigen::MatrixXd::Ones(k, k);
    return x;
  };

  SystemTerms lim;
  lim.w = Eigen::VectorXd::Ones(k);
  lim.alpha = Eigen::MatrixXd::Zero(k, k);
  lim.beta = Eigen::VectorXd::Zero(k);
  lim.external.resize(k);
  lim.service = Eigen::VectorXd::Zero(k);
  for (int i = 0; i < k; ++i) lim.external[i] = model.arrivals[i].idc.asymptote();
  SystemSolution c = blank();
  sweep(lim, c, true);
  v.ca2 = c.a;
  v.cd2 = c.d;
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      if (rates.active_flow(i, j)) v.ca2_flow(i, j) = c.f(i, j);
    }
  }
  v.cx2 = v.ca2 + v.cs2;
  v.residual = detail::system_residual(rates, lim, c);

  bool degenerate = false;
  std::vector<SystemSolution> per_t;
  per_t.reserve(grid.size());
  for (double t : grid) {
    const SystemTerms s = detail::terms_at(model, rates, v, out.zeta, t, false, &degenerate);
    SystemSolution x = blank();
    sweep(s, x, false);
    x.residual = detail::system_residual(rates, s, x);
    out.max_residual = std::max(out.max_residual, x.residual);
    per_t.push_back(std::move(x));
  }
  const SystemTerms s0 = detail::terms_at(model, rates, v, out.zeta, 0.0, false, nullptr);
  SystemSolution zero = blank();
  sweep(s0, zero, false);
  if (degenerate) out.warnings.push_back("a station has c_x^2 = 0; its weight is the indicator of t > 0");
  detail::collect(out, per_t, zero);
  return out;
}

}  // namespace rqna
