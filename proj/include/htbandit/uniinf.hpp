#pragma once

// uniINF: log-barrier FTRL with action-dependent skipping/clipping of observed losses and a
// learning-rate scale driven by the clipped losses. The policy sees only the arm count, the
// horizon and the bandit feedback; it never receives heavy-tail parameters.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "htbandit/errors.hpp"
#include "htbandit/ftrl.hpp"

namespace htbandit {

inline constexpr double kInitialScale = 4.0;
inline constexpr double kOneMinusXClamp = 1e-15;
inline constexpr double kMinPlayedProbability = 1e-300;

struct UniInfState {
  std::size_t t = 1;  // 1-based round index of the next round to play
  std::size_t arms = 0;
  std::size_t horizon = 0;
  double scale = kInitialScale;  // S_t
  CumulativeLoss cumulative;

  double log_horizon() const { return std::log(static_cast<double>(horizon)); }

  bool operator==(const UniInfState&) const = default;
};

struct SkipClipOutcome {
  double threshold = 0.0;
  double skipped_loss = 0.0;
  double clipped_loss = 0.0;
  bool was_skipped = false;
};

struct RoundUpdate {
  std::vector<double> estimated_loss;  // nonzero only at the played arm
  double next_scale = 0.0;
  SkipClipOutcome outcome;
  std::size_t arm = 0;
};

inline UniInfState init(std::size_t arms, std::size_t horizon) {
  if (arms < 2) throw DomainError("uniINF needs at least two arms");
  if (horizon < 2) throw DomainError("uniINF needs a horizon of at least two rounds");
  UniInfState state;
  state.arms = arms;
  state.horizon = horizon;
  state.cumulative = CumulativeLoss::zeros(arms);
  return state;
}

inline SimplexPoint action_distribution(const UniInfState& state, const SolverOptions& options = {}) {
  return solve_log_barrier(state.cumulative, state.scale, options).point;
}

/// Inverse-CDF draw: the first arm whose cumulative probability exceeds u.
inline std::size_t sample_arm(const SimplexPoint& x, double u) {
  double cdf = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    cdf += x[i];
    if (cdf > u) return i;
  }
  // u landed in the rounding gap above the last partial sum; take the last arm with mass.
  for (std::size_t i = x.size(); i-- > 0;) {
    if (x[i] > 0.0) return i;
  }
  return x.size() - 1;
}

inline double skip_threshold(double scale, double prob) {
  return scale / (4.0 * std::max(1.0 - prob, kOneMinusXClamp));
}

inline double skip_threshold(const UniInfState& state, const SimplexPoint& x, std::size_t arm) {
  return skip_threshold(state.scale, x[arm]);
}

inline SkipClipOutcome skip_clip(double raw_loss, double threshold) {
  if (!std::isfinite(raw_loss)) throw NonFiniteInput("observed loss is not finite");
  if (!(threshold > 0.0)) throw DomainError("skip threshold must be positive");
  SkipClipOutcome out;
  out.threshold = threshold;
  out.was_skipped = !(std::abs(raw_loss) < threshold);
  out.skipped_loss = out.was_skipped ? 0.0 : raw_loss;
  out.clipped_loss = std::clamp(raw_loss, -threshold, threshold);
  return out;
}

/// Squared-scale growth factor applied on a skipped round: 1 + 1/(16 K log T).
inline double skip_growth_factor(std::size_t arms, double log_horizon) {
  return 1.0 + 1.0 / (16.0 * static_cast<double>(arms) * log_horizon);
}

inline std::pair<UniInfState, RoundUpdate> observe(const UniInfState& state, const SimplexPoint& x,
                                                   std::size_t arm, double raw_loss) {
  if (!std::isfinite(raw_loss)) throw NonFiniteInput("observed loss is not finite");
  if (arm >= state.arms || x.size() != state.arms) throw DomainError("played arm out of range");
  const double prob = x[arm];
  if (!(prob >= kMinPlayedProbability)) {
    throw DomainError("played-arm probability below the importance-weight guard");
  }

  RoundUpdate update;
  update.arm = arm;
  update.outcome = skip_clip(raw_loss, skip_threshold(state.scale, prob));
  update.estimated_loss.assign(state.arms, 0.0);
  update.estimated_loss[arm] = update.outcome.skipped_loss / prob;

  const double log_t = state.log_horizon();
  const double k = static_cast<double>(state.arms);
  double next_sq;
  if (update.outcome.was_skipped) {
    // Here the clipped loss equals +-C, so clip^2 (1-x)^2 = S^2/16 and the update closes.
    next_sq = state.scale * state.scale * skip_growth_factor(state.arms, log_t);
  } else {
    const double weighted = update.outcome.clipped_loss * (1.0 - prob);
    next_sq = state.scale * state.scale + weighted * weighted / (k * log_t);
  }
  update.next_scale = std::max(state.scale, std::sqrt(next_sq));

  UniInfState next = state;
  next.t = state.t + 1;
  next.scale = update.next_scale;
  next.cumulative.values[arm] += update.estimated_loss[arm];
  return {std::move(next), std::move(update)};
}

/// Posterior point z_t: the FTRL solution with the round's estimate already added but the
/// old scale S_t. Diagnostic only.
inline SimplexPoint posterior_point(const UniInfState& state_before, const RoundUpdate& update,
                                    const SolverOptions& options = {}) {
  CumulativeLoss after = state_before.cumulative;
  for (std::size_t i = 0; i < after.size(); ++i) after.values[i] += update.estimated_loss[i];
  return solve_log_barrier(after, state_before.scale, options).point;
}

}  // namespace htbandit
