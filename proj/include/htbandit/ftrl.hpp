#pragma once

// Log-barrier follow-the-regularized-leader over the probability simplex.
//
// The FTRL step minimizes <L, x> - S * sum_i log(x_i) over the simplex. Its KKT system
// gives x_i = S / (L_i - Z) for a scalar multiplier Z < min L, so the whole problem
// reduces to a one-dimensional monotone root find on Z.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "htbandit/errors.hpp"

namespace htbandit {

/// A probability vector over K arms.
struct SimplexPoint {
  std::vector<double> probs;

  std::size_t size() const { return probs.size(); }
  double operator[](std::size_t i) const { return probs[i]; }

  static SimplexPoint uniform(std::size_t k) {
    return SimplexPoint{std::vector<double>(k, 1.0 / static_cast<double>(k))};
  }

  /// True when every entry is strictly positive and the entries sum to 1 within `tol`.
  bool is_interior(double tol = 1e-9) const {
    if (probs.empty()) return false;
    double sum = 0.0;
    for (double p : probs) {
      if (!(p > 0.0) || !std::isfinite(p)) return false;
      sum += p;
    }
    return std::abs(sum - 1.0) <= tol;
  }

  bool operator==(const SimplexPoint&) const = default;
};

/// Accumulated importance-weighted loss per arm.
struct CumulativeLoss {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }

  static CumulativeLoss zeros(std::size_t k) { return CumulativeLoss{std::vector<double>(k, 0.0)}; }

  bool operator==(const CumulativeLoss&) const = default;
};

struct LogBarrierSolution {
  SimplexPoint point;
  double multiplier = 0.0;  // Z, strictly below min L
  double residual = 0.0;    // |sum_i S / (L_i - Z) - 1| at the accepted multiplier
  int iterations = 0;
};

struct SolverOptions {
  double tol = 1e-12;
  int max_iterations = 200;
  // Bisection runs until the bracket width falls below this fraction of its upper end.
  double bisection_relative_width = 1e-3;
};

namespace detail {

inline void require_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw NonFiniteInput(std::string(what) + " contains a non-finite entry");
  }
}

// x - log(1 + x), accurate for small |x|.
inline double x_minus_log1p(double x) {
  if (std::abs(x) < 1e-3) {
    // Alternating series x^2/2 - x^3/3 + ...; seven terms reach double precision here.
    double term = x * x;
    double sum = 0.0;
    for (int n = 2; n <= 8; ++n) {
      sum += ((n % 2 == 0) ? 1.0 : -1.0) * term / n;
      term *= x;
    }
    return sum;
  }
  return x - std::log1p(x);
}

}  // namespace detail

/// Exact minimizer of <L, x> - S * sum log x_i over the simplex.
///
/// Works on the shifted offsets d_i = L_i - min L and the gap u = min L - Z, which lies in
/// [S, K*S]: the smallest-offset term alone is 1 at u = S, and every term is at most 1/K at
/// u = K*S. Bisection narrows the bracket, then Newton polishes; the sum of S / (d_i + u) is
/// convex and decreasing in u, so Newton started from the left end never overshoots.
inline LogBarrierSolution solve_log_barrier(std::span<const double> cumulative_loss, double scale,
                                            const SolverOptions& options = {}) {
  const std::size_t k = cumulative_loss.size();
  if (!std::isfinite(scale)) throw NonFiniteInput("log-barrier scale is not finite");
  detail::require_finite(cumulative_loss, "cumulative loss");
  if (k < 2) throw DomainError("log-barrier solver needs at least two arms");
  if (!(scale > 0.0)) throw DomainError("log-barrier scale must be positive");
  if (!(options.tol > 0.0)) throw DomainError("solver tolerance must be positive");

  const double min_loss = *std::min_element(cumulative_loss.begin(), cumulative_loss.end());
  std::vector<double> offsets(k);
  for (std::size_t i = 0; i < k; ++i) offsets[i] = cumulative_loss[i] - min_loss;

  auto mass = [&](double u) {
    double sum = 0.0;
    for (double d : offsets) sum += scale / (d + u);
    return sum;
  };
  auto mass_slope = [&](double u) {
    double sum = 0.0;
    for (double d : offsets) {
      const double xi = scale / (d + u);
      sum += xi * xi / scale;
    }
    return sum;  // -d/du of mass(u)
  };

  double lo = scale;
  double hi = static_cast<double>(k) * scale;
  int iterations = 0;

  while (hi - lo > options.bisection_relative_width * hi && iterations < options.max_iterations) {
    const double mid = 0.5 * (lo + hi);
    if (mass(mid) >= 1.0) {
      lo = mid;
    } else {
      hi = mid;
    }
    ++iterations;
  }

  double u = lo;
  double value = mass(u);
  while (std::abs(value - 1.0) > options.tol && iterations < options.max_iterations) {
    double next = u + (value - 1.0) / mass_slope(u);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const double next_value = mass(next);
    if (next_value >= 1.0) {
      lo = next;
    } else {
      hi = next;
    }
    ++iterations;
    if (next == u) {
      value = next_value;
      break;
    }
    u = next;
    value = next_value;
  }

  const double residual = std::abs(value - 1.0);
  if (residual > options.tol) {
    throw NoConvergence("log-barrier multiplier residual " + std::to_string(residual) +
                        " above tolerance after " + std::to_string(iterations) + " iterations");
  }

  LogBarrierSolution out;
  out.point.probs.resize(k);
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    out.point.probs[i] = scale / (offsets[i] + u);
    total += out.point.probs[i];
  }
  for (double& p : out.point.probs) p /= total;
  out.multiplier = min_loss - u;
  out.residual = residual;
  out.iterations = iterations;
  return out;
}

inline LogBarrierSolution solve_log_barrier(const CumulativeLoss& cumulative_loss, double scale,
                                            const SolverOptions& options = {}) {
  return solve_log_barrier(std::span<const double>(cumulative_loss.values), scale, options);
}

/// Bregman divergence of the log-barrier with scale S:
/// S * sum_i (x_i/z_i - 1 - log(x_i/z_i)).
inline double bregman_divergence_log_barrier(double scale, const SimplexPoint& x, const SimplexPoint& z) {
  if (x.size() != z.size()) throw DomainError("Bregman divergence arguments differ in dimension");
  if (!(scale > 0.0)) throw DomainError("log-barrier scale must be positive");
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(z[i] > 0.0)) throw DomainError("Bregman divergence needs z strictly inside the simplex");
    if (!(x[i] > 0.0)) throw DomainError("Bregman divergence needs x strictly inside the simplex");
    sum += detail::x_minus_log1p(x[i] / z[i] - 1.0);
  }
  return std::max(0.0, scale * sum);
}

/// Psi(x) = -S * sum_i log x_i.
inline double psi_value(double scale, const SimplexPoint& x) {
  double sum = 0.0;
  for (double p : x.probs) {
    if (!(p > 0.0)) throw DomainError("log-barrier is undefined on the simplex boundary");
    sum += std::log(p);
  }
  return -scale * sum;
}

/// Regularizer-shift term for a scale change S_t -> S_next, measured at the adjusted
/// benchmark y_tilde and at the next iterate x_next:
/// (S_next - S_t) * (-sum log y_tilde_i + sum log x_next_i).
inline double psi_shift(double scale, double next_scale, const SimplexPoint& y_tilde,
                        const SimplexPoint& x_next) {
  if (next_scale < scale) throw DomainError("learning-rate scale must be non-decreasing");
  if (y_tilde.size() != x_next.size()) throw DomainError("psi shift arguments differ in dimension");
  const double delta = next_scale - scale;
  if (delta == 0.0) {
    // Still reject boundary points, as the general path would.
    (void)psi_value(1.0, y_tilde);
    (void)psi_value(1.0, x_next);
    return 0.0;
  }
  return psi_value(delta, y_tilde) - psi_value(delta, x_next);
}

/// Upper bound (S_next - S_t) * K * log T that the shift term obeys whenever every
/// y_tilde_i >= 1/T.
inline double psi_shift_bound(double scale, double next_scale, std::size_t arms, double horizon) {
  return (next_scale - scale) * static_cast<double>(arms) * std::log(horizon);
}

}  // namespace htbandit
