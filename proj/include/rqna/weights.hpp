#pragma once

#include <cmath>
#include <limits>
#include <iterator>
#include <numbers>

namespace rqna {

inline double normal_tail(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

inline double normal_density(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

/// Canonical weight function for the departure IDC:
///   w*(t) = (1/2t) ((t^2 + 2t - 1)(1 - 2 Phi^c(sqrt t)) + 2 phi(sqrt t) sqrt t (1 + t) - t^2),
/// increasing from w*(0) = 0 to w*(inf) = 1.
inline double w_star(double t) {
  if (std::isnan(t) || t <= 0.0) return 0.0;
  if (std::isinf(t)) return 1.0;
  if (t < 1e-2) {
    // The closed form cancels catastrophically near zero; use its expansion in s = sqrt(t).
    static constexpr double c[] = {1.0638460810704871412,   -0.5,
                                   0.10638460810704871412,  0.0,
                                   -0.0037994502895374540756, 0.0,
                                   0.00021108057164096967087, 0.0,
                                   -0.000011993214297782367663, 0.0,
                                   6.4578846218828133570e-7, 0.0,
                                   -3.2289423109414066785e-8, 0.0,
                                   1.4923682949729190531e-9};
    const double s = std::sqrt(t);
    double acc = 0.0;
    for (int k = static_cast<int>(std::size(c)) - 1; k >= 0; --k) acc = acc * s + c[k];
    return acc * s;
  }
  const double s = std::sqrt(t);
  const double v = (2.0 * t - 1.0 - 2.0 * (t * t + 2.0 * t - 1.0) * normal_tail(s) +
                    2.0 * normal_density(s) * s * (1.0 + t)) /
                   (2.0 * t);
  return std::fmin(1.0, std::fmax(0.0, v));
}

}  // namespace rqna
