#pragma once

// Heavy-tailed loss environments built from three-point laws. Every quantity the regret
// analysis assumes about the environment (mean, alpha-moment, gaps, truncated
// non-negativity of the benchmark arm) has a closed form here, so the assumptions become
// checks instead of claims.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "htbandit/errors.hpp"

namespace htbandit {

/// Loss law taking mean - spread and mean + spread with probability tail_prob/2 each, and
/// mean otherwise.
struct ThreePointArm {
  double mean = 0.0;
  double spread = 1.0;
  double tail_prob = 0.0;

  void validate() const {
    if (!std::isfinite(mean) || !std::isfinite(spread) || !std::isfinite(tail_prob)) {
      throw NonFiniteInput("three-point arm parameters must be finite");
    }
    if (!(spread > 0.0)) throw DomainError("three-point arm spread must be positive");
    if (tail_prob < 0.0 || tail_prob > 1.0) throw DomainError("three-point arm tail probability must lie in [0,1]");
  }

  double low() const { return mean - spread; }
  double high() const { return mean + spread; }

  /// Inverse CDF.
  double sample(double u) const {
    if (u < 0.5 * tail_prob) return low();
    if (u >= 1.0 - 0.5 * tail_prob) return high();
    return mean;
  }

  bool operator==(const ThreePointArm&) const = default;
};

inline double alpha_moment(const ThreePointArm& arm, double alpha) {
  if (!(alpha > 1.0 && alpha <= 2.0)) throw DomainError("alpha must lie in (1, 2]");
  const double p = arm.tail_prob;
  return (1.0 - p) * std::pow(std::abs(arm.mean), alpha) +
         0.5 * p * (std::pow(std::abs(arm.low()), alpha) + std::pow(std::abs(arm.high()), alpha));
}

/// Largest tail probability for which a three-point arm with the given mean and spread
/// still satisfies E|X|^alpha <= sigma^alpha (the moment is affine in the tail probability).
/// Returns a negative value when even tail_prob = 0 violates the bound.
inline double max_tail_prob(double mean, double spread, double alpha, double sigma) {
  const double bound = std::pow(sigma, alpha);
  const double center = std::pow(std::abs(mean), alpha);
  const double tails =
      0.5 * (std::pow(std::abs(mean - spread), alpha) + std::pow(std::abs(mean + spread), alpha));
  if (center > bound) return -1.0;
  if (tails <= bound) return 1.0;
  return std::min(1.0, (bound - center) / (tails - center));
}

/// E[X * 1[|X| > level]] in closed form.
inline double truncated_expectation(const ThreePointArm& arm, double level) {
  const double p = arm.tail_prob;
  double sum = 0.0;
  if (std::abs(arm.low()) > level) sum += 0.5 * p * arm.low();
  if (std::abs(arm.mean) > level) sum += (1.0 - p) * arm.mean;
  if (std::abs(arm.high()) > level) sum += 0.5 * p * arm.high();
  return sum;
}

struct TruncationCheck {
  bool non_negative = true;
  std::optional<double> witness;  // a level M with E[X 1[|X| > M]] < 0
  double value_at_witness = 0.0;
};

/// Truncated non-negativity: E[X 1[|X| > M]] >= 0 for every M >= 0.
///
/// The truncated expectation is a step function of M, constant on [b_k, b_{k+1}) for the
/// sorted breakpoints {0, |mean - spread|, |mean|, |mean + spread|}, so checking the left end
/// of every interval is exhaustive.
inline TruncationCheck check_truncated_nonneg(const ThreePointArm& arm) {
  std::vector<double> levels{0.0, std::abs(arm.low()), std::abs(arm.mean), std::abs(arm.high())};
  std::sort(levels.begin(), levels.end());
  TruncationCheck out;
  for (double level : levels) {
    const double value = truncated_expectation(arm, level);
    if (value < 0.0) {
      out.non_negative = false;
      out.witness = level;
      out.value_at_witness = value;
      return out;
    }
  }
  return out;
}

struct Phase {
  std::size_t length = 0;
  std::vector<ThreePointArm> arms;

  bool operator==(const Phase&) const = default;
};

struct StochasticArms {
  std::vector<ThreePointArm> arms;

  bool operator==(const StochasticArms&) const = default;
};

struct AdversarialSchedule {
  std::vector<Phase> phases;

  bool operator==(const AdversarialSchedule&) const = default;
};

/// An environment plus the heavy-tail parameters it claims. (alpha, sigma) are used only to
/// verify the claim and to label experiments; policies never see them.
struct EnvironmentSpec {
  std::variant<StochasticArms, AdversarialSchedule> kind;
  double alpha = 2.0;
  double sigma = 1.0;

  bool is_stochastic() const { return std::holds_alternative<StochasticArms>(kind); }

  std::size_t arms() const {
    if (const auto* s = std::get_if<StochasticArms>(&kind)) return s->arms.size();
    const auto& a = std::get<AdversarialSchedule>(kind);
    return a.phases.empty() ? 0 : a.phases.front().arms.size();
  }

  /// Rounds covered by the schedule; unbounded for stochastic environments.
  std::size_t length() const {
    if (is_stochastic()) return std::numeric_limits<std::size_t>::max();
    std::size_t total = 0;
    for (const auto& phase : std::get<AdversarialSchedule>(kind).phases) total += phase.length;
    return total;
  }

  /// Arm laws active at round t (1-based).
  const std::vector<ThreePointArm>& arms_at(std::size_t t) const {
    if (const auto* s = std::get_if<StochasticArms>(&kind)) return s->arms;
    const auto& phases = std::get<AdversarialSchedule>(kind).phases;
    std::size_t end = 0;
    for (const auto& phase : phases) {
      end += phase.length;
      if (t <= end) return phase.arms;
    }
    throw DomainError("round " + std::to_string(t) + " is beyond the adversarial schedule");
  }

  void validate() const {
    if (!(alpha > 1.0 && alpha <= 2.0)) throw DomainError("declared alpha must lie in (1, 2]");
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw DomainError("declared sigma must be finite and >= 0");
    if (const auto* s = std::get_if<StochasticArms>(&kind)) {
      if (s->arms.size() < 2) throw DomainError("environment needs at least two arms");
      for (const auto& arm : s->arms) arm.validate();
      return;
    }
    const auto& phases = std::get<AdversarialSchedule>(kind).phases;
    if (phases.empty()) throw DomainError("adversarial schedule has no phases");
    const std::size_t k = phases.front().arms.size();
    if (k < 2) throw DomainError("environment needs at least two arms");
    for (const auto& phase : phases) {
      if (phase.length == 0) throw DomainError("adversarial phase with zero length");
      if (phase.arms.size() != k) throw DomainError("adversarial phases disagree on the arm count");
      for (const auto& arm : phase.arms) arm.validate();
    }
  }

  bool operator==(const EnvironmentSpec&) const = default;
};

struct MomentEntry {
  std::size_t phase = 0;
  std::size_t arm = 0;
  double moment = 0.0;
  double bound = 0.0;   // sigma^alpha
  double margin = 0.0;  // bound - moment
  bool ok = true;
};

struct MomentReport {
  std::vector<MomentEntry> entries;
  bool all_ok = true;
};

inline MomentReport check_moment_bound(const EnvironmentSpec& env) {
  MomentReport report;
  const double bound = std::pow(env.sigma, env.alpha);
  auto add = [&](std::size_t phase, std::size_t arm, const ThreePointArm& law) {
    MomentEntry e;
    e.phase = phase;
    e.arm = arm;
    e.moment = alpha_moment(law, env.alpha);
    e.bound = bound;
    e.margin = bound - e.moment;
    e.ok = e.moment <= bound;
    report.all_ok = report.all_ok && e.ok;
    report.entries.push_back(e);
  };
  if (const auto* s = std::get_if<StochasticArms>(&env.kind)) {
    for (std::size_t i = 0; i < s->arms.size(); ++i) add(0, i, s->arms[i]);
  } else {
    const auto& phases = std::get<AdversarialSchedule>(env.kind).phases;
    for (std::size_t p = 0; p < phases.size(); ++p) {
      for (std::size_t i = 0; i < phases[p].arms.size(); ++i) add(p, i, phases[p].arms[i]);
    }
  }
  return report;
}

struct GapInfo {
  std::vector<double> gaps;
  double min_gap = 0.0;
  std::size_t best_arm = 0;
};

inline GapInfo gap_vector(const EnvironmentSpec& env) {
  const auto* s = std::get_if<StochasticArms>(&env.kind);
  if (s == nullptr) throw DomainError("gap vector is defined for stochastic environments only");
  if (s->arms.size() < 2) throw DomainError("environment needs at least two arms");
  GapInfo info;
  for (std::size_t i = 1; i < s->arms.size(); ++i) {
    if (s->arms[i].mean < s->arms[info.best_arm].mean) info.best_arm = i;
  }
  const double best = s->arms[info.best_arm].mean;
  info.min_gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < s->arms.size(); ++i) {
    info.gaps.push_back(s->arms[i].mean - best);
    if (i == info.best_arm) continue;
    if (info.gaps.back() == 0.0) {
      throw NonUniqueBestArm("arms " + std::to_string(info.best_arm) + " and " + std::to_string(i) +
                             " share the minimal mean; a unique best arm is required");
    }
    info.min_gap = std::min(info.min_gap, info.gaps.back());
  }
  return info;
}

/// Mean loss of `arm` summed over rounds 1..horizon.
inline double cumulative_mean(const EnvironmentSpec& env, std::size_t arm, std::size_t horizon) {
  if (const auto* s = std::get_if<StochasticArms>(&env.kind)) {
    return s->arms[arm].mean * static_cast<double>(horizon);
  }
  double total = 0.0;
  std::size_t covered = 0;
  for (const auto& phase : std::get<AdversarialSchedule>(env.kind).phases) {
    if (covered >= horizon) break;
    const std::size_t take = std::min(phase.length, horizon - covered);
    total += phase.arms[arm].mean * static_cast<double>(take);
    covered += take;
  }
  return total;
}

/// Best fixed arm in hindsight over mean losses; ties go to the lowest index.
inline std::size_t benchmark_arm(const EnvironmentSpec& env, std::size_t horizon) {
  std::size_t best = 0;
  double best_total = cumulative_mean(env, 0, horizon);
  for (std::size_t i = 1; i < env.arms(); ++i) {
    const double total = cumulative_mean(env, i, horizon);
    if (total < best_total) {
      best = i;
      best_total = total;
    }
  }
  return best;
}

/// Draws the full loss vector of round t from K uniforms, one per arm.
inline void sample_loss_vector(const EnvironmentSpec& env, std::size_t t, std::span<const double> uniforms,
                               std::span<double> out) {
  if (t < 1 || t > env.length()) throw DomainError("round " + std::to_string(t) + " out of range");
  const auto& laws = env.arms_at(t);
  if (uniforms.size() != laws.size() || out.size() != laws.size()) {
    throw DomainError("loss sampling needs one uniform per arm");
  }
  for (std::size_t i = 0; i < laws.size(); ++i) out[i] = laws[i].sample(uniforms[i]);
}

inline std::vector<double> sample_loss_vector(const EnvironmentSpec& env, std::size_t t,
                                              std::span<const double> uniforms) {
  std::vector<double> out(uniforms.size());
  sample_loss_vector(env, t, uniforms, out);
  return out;
}

/// Environment whose lowest-mean arm rotates every phase: in phase p the arm p mod K has
/// mean base_mean - gap, every other arm base_mean; all arms share the (spread, tail_prob)
/// tails. A single phase yields a stochastic environment.
inline EnvironmentSpec make_switching_adversary(std::size_t arms, std::size_t horizon, std::size_t phases,
                                                double base_mean, double gap, double spread, double tail_prob,
                                                double alpha, double sigma) {
  if (arms < 2) throw DomainError("switching adversary needs at least two arms");
  if (phases < 1 || phases > horizon) throw DomainError("phase count must lie in [1, T]");
  if (!(gap > 0.0) || !std::isfinite(gap) || !std::isfinite(base_mean)) {
    throw DomainError("switching adversary needs a finite positive gap");
  }

  auto phase_arms = [&](std::size_t p) {
    std::vector<ThreePointArm> laws(arms, ThreePointArm{base_mean, spread, tail_prob});
    laws[p % arms].mean = base_mean - gap;
    return laws;
  };

  EnvironmentSpec env;
  env.alpha = alpha;
  env.sigma = sigma;
  if (phases == 1) {
    env.kind = StochasticArms{phase_arms(0)};
  } else {
    AdversarialSchedule schedule;
    const std::size_t length = horizon / phases;
    for (std::size_t p = 0; p < phases; ++p) {
      const std::size_t len = (p + 1 == phases) ? horizon - length * (phases - 1) : length;
      schedule.phases.push_back(Phase{len, phase_arms(p)});
    }
    env.kind = std::move(schedule);
  }
  env.validate();

  const auto moments = check_moment_bound(env);
  if (!moments.all_ok) {
    throw DomainError("switching adversary violates the declared moment bound sigma^alpha");
  }
  if (!check_truncated_nonneg(phase_arms(0)[0]).non_negative) {
    throw DomainError("phase-1 best arm is not truncated non-negative");
  }
  return env;
}

/// Everything a run requires of its environment over a given horizon.
struct EnvironmentAssessment {
  MomentReport moments;
  std::size_t benchmark = 0;
  std::vector<TruncationCheck> benchmark_truncation;  // one per phase (one for stochastic)
  std::optional<GapInfo> gaps;
  std::string gap_error;
  bool covers_horizon = true;

  bool truncation_ok() const {
    return std::all_of(benchmark_truncation.begin(), benchmark_truncation.end(),
                       [](const TruncationCheck& c) { return c.non_negative; });
  }
  bool passes() const { return moments.all_ok && truncation_ok() && gap_error.empty() && covers_horizon; }
};

inline EnvironmentAssessment assess_environment(const EnvironmentSpec& env, std::size_t horizon) {
  env.validate();
  EnvironmentAssessment out;
  out.moments = check_moment_bound(env);
  out.covers_horizon = env.length() >= horizon;
  if (env.is_stochastic()) {
    try {
      out.gaps = gap_vector(env);
      out.benchmark = out.gaps->best_arm;
    } catch (const NonUniqueBestArm& e) {
      out.gap_error = e.what();
      out.benchmark = benchmark_arm(env, horizon);
    }
    out.benchmark_truncation.push_back(
        check_truncated_nonneg(std::get<StochasticArms>(env.kind).arms[out.benchmark]));
  } else {
    out.benchmark = benchmark_arm(env, horizon);
    for (const auto& phase : std::get<AdversarialSchedule>(env.kind).phases) {
      out.benchmark_truncation.push_back(check_truncated_nonneg(phase.arms[out.benchmark]));
    }
  }
  return out;
}

}  // namespace htbandit
