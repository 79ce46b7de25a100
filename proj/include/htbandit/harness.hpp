#pragma once

// Trajectory runner, pseudo-regret accounting, the per-round diagnostics ledger and its
// audit, Monte-Carlo aggregation and log-log scaling fits.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "htbandit/baselines.hpp"
#include "htbandit/environment.hpp"
#include "htbandit/errors.hpp"
#include "htbandit/ftrl.hpp"
#include "htbandit/rng.hpp"
#include "htbandit/uniinf.hpp"

namespace htbandit {

struct UniInfPolicy {
  bool operator==(const UniInfPolicy&) const = default;
};
struct TruncatedUcbPolicy {
  double alpha = 2.0;
  double sigma = 1.0;
  bool operator==(const TruncatedUcbPolicy&) const = default;
};
struct UniformPolicy {
  bool operator==(const UniformPolicy&) const = default;
};
using PolicySpec = std::variant<UniInfPolicy, TruncatedUcbPolicy, UniformPolicy>;

inline std::string policy_name(const PolicySpec& policy) {
  if (std::holds_alternative<UniInfPolicy>(policy)) return "uniinf";
  if (std::holds_alternative<TruncatedUcbPolicy>(policy)) return "truncated_ucb";
  return "uniform";
}

struct RoundRecord {
  std::size_t t = 0;
  std::size_t arm = 0;
  SimplexPoint x;
  std::optional<SimplexPoint> z;
  double scale = 0.0;       // S_t
  double next_scale = 0.0;  // S_{t+1}
  double threshold = 0.0;   // C_{t,i_t}
  double raw_loss = 0.0;
  double skipped_loss = 0.0;
  double clipped_loss = 0.0;
  double div = 0.0;
  double shift = 0.0;
  double skip_error = 0.0;  // raw_loss * 1[|raw_loss| >= C]
  bool was_skipped = false;
  bool suboptimal = false;  // arm != benchmark arm

  bool operator==(const RoundRecord&) const = default;
};

/// y_tilde: 1/T on every arm but the benchmark, which takes the remaining mass.
inline SimplexPoint adjusted_benchmark(std::size_t arms, std::size_t horizon, std::size_t benchmark) {
  if (horizon < arms) throw DomainError("adjusted benchmark needs T >= K");
  const double small = 1.0 / static_cast<double>(horizon);
  SimplexPoint y{std::vector<double>(arms, small)};
  y.probs[benchmark] = 1.0 - static_cast<double>(arms - 1) * small;
  return y;
}

// ---------------------------------------------------------------------------------------
// Audit

struct BoundCheck {
  std::string name;
  bool advisory = false;  // violations are reported but do not fail the audit
  std::size_t checked = 0;
  std::size_t violations = 0;
  double max_ratio = 0.0;  // largest observed value / bound
  std::size_t worst_round = 0;
  std::vector<std::size_t> violating_rounds;  // first few only

  void observe(std::size_t t, double value, double bound, bool violated) {
    ++checked;
    double ratio;
    if (bound > 0.0) {
      ratio = value / bound;
    } else {
      ratio = value > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    }
    if (checked == 1 || ratio > max_ratio) {
      max_ratio = ratio;
      worst_round = t;
    }
    if (violated) {
      ++violations;
      if (violating_rounds.size() < 16) violating_rounds.push_back(t);
    }
  }
};

struct AuditReport {
  std::vector<BoundCheck> checks;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(),
                       [](const BoundCheck& c) { return c.advisory || c.violations == 0; });
  }
  std::size_t violations() const {
    std::size_t n = 0;
    for (const auto& c : checks) n += c.advisory ? 0 : c.violations;
    return n;
  }
  const BoundCheck* find(const std::string& name) const {
    for (const auto& c : checks) {
      if (c.name == name) return &c;
    }
    return nullptr;
  }
  BoundCheck& at(const std::string& name) {
    for (auto& c : checks) {
      if (c.name == name) return c;
    }
    checks.push_back(BoundCheck{name, false, 0, 0, 0.0, 0, {}});
    return checks.back();
  }
};

struct AuditOptions {
  double relative_slack = 1e-9;
  double absolute_slack = 1e-12;
  double band_slack = 1e-9;  // on the (x, z) multiplicative band
  double skip_growth_ulps = 4.0;
};

namespace audit_names {
inline constexpr const char* kDivRound = "div_round_2048";
inline constexpr const char* kDivRoundRelaxed = "div_round_8192";
inline constexpr const char* kDivCumulative = "div_cumulative_4096";
inline constexpr const char* kShiftRound = "shift_round_half";
inline constexpr const char* kShiftCumulative = "shift_cumulative";
inline constexpr const char* kBand = "posterior_band";
inline constexpr const char* kScaleMonotone = "scale_nondecreasing";
inline constexpr const char* kScaleSqrt2 = "scale_growth_sqrt2";
inline constexpr const char* kSkipGrowth = "skip_growth_law";
inline constexpr const char* kSkipErr = "skip_error_consistency";
inline constexpr const char* kShiftSign = "shift_nonnegative";
}  // namespace audit_names

inline double ulp_of(double v) { return std::nextafter(v, std::numeric_limits<double>::infinity()) - v; }

/// Checks the deterministic per-round inequalities of the regret decomposition on a
/// diagnostics stream. Checks involving z_t are skipped for records without one.
inline AuditReport decomposition_audit(std::span<const RoundRecord> records, std::size_t arms, std::size_t horizon,
                                       const AuditOptions& options = {}) {
  namespace n = audit_names;
  AuditReport report;
  for (const char* name : {n::kDivRound, n::kDivRoundRelaxed, n::kDivCumulative, n::kShiftRound,
                           n::kShiftCumulative, n::kBand, n::kScaleMonotone, n::kScaleSqrt2, n::kSkipGrowth,
                           n::kSkipErr, n::kShiftSign}) {
    report.at(name);
  }
  report.at(n::kDivRound).advisory = true;
  report.at(n::kShiftSign).advisory = true;

  const double k_log_t = static_cast<double>(arms) * std::log(static_cast<double>(horizon));
  const double growth = skip_growth_factor(arms, std::log(static_cast<double>(horizon)));
  auto exceeds = [&](double value, double bound) {
    return value > bound * (1.0 + options.relative_slack) + options.absolute_slack;
  };

  double div_sum = 0.0;
  double shift_sum = 0.0;
  for (const auto& r : records) {
    const double played = r.x[r.arm];
    const double one_minus = 1.0 - played;
    const double inv_scale = 1.0 / r.scale;

    const double div_unit = inv_scale * r.skipped_loss * r.skipped_loss * one_minus * one_minus;
    report.at(n::kDivRound).observe(r.t, r.div, 2048.0 * div_unit, exceeds(r.div, 2048.0 * div_unit));
    report.at(n::kDivRoundRelaxed).observe(r.t, r.div, 8192.0 * div_unit, exceeds(r.div, 8192.0 * div_unit));

    div_sum += r.div;
    const double div_cap = 4096.0 * r.next_scale * k_log_t;
    report.at(n::kDivCumulative).observe(r.t, div_sum, div_cap, exceeds(div_sum, div_cap));

    const double shift_cap = 0.5 * inv_scale * r.clipped_loss * r.clipped_loss * one_minus * one_minus;
    report.at(n::kShiftRound).observe(r.t, r.shift, shift_cap, exceeds(r.shift, shift_cap));
    shift_sum += r.shift;
    const double shift_total_cap = r.next_scale * k_log_t;
    report.at(n::kShiftCumulative).observe(r.t, shift_sum, shift_total_cap, exceeds(shift_sum, shift_total_cap));
    report.at(n::kShiftSign).observe(r.t, -r.shift, 0.0, r.shift < 0.0);

    if (r.z) {
      double worst = 0.0;
      bool bad = false;
      for (std::size_t i = 0; i < r.x.size(); ++i) {
        const double lo = 0.5 * r.x[i] - options.band_slack;
        const double hi = 2.0 * r.x[i] + options.band_slack;
        const double zi = (*r.z)[i];
        bad = bad || zi < lo || zi > hi;
        worst = std::max(worst, std::max(zi / r.x[i], r.x[i] / zi) / 2.0);
      }
      report.at(n::kBand).observe(r.t, worst, 1.0, bad);
    }

    report.at(n::kScaleMonotone).observe(r.t, r.scale, r.next_scale, r.next_scale < r.scale);
    report.at(n::kScaleSqrt2).observe(r.t, r.next_scale, std::sqrt(2.0) * r.scale,
                                      r.next_scale > std::sqrt(2.0) * r.scale);
    if (r.was_skipped) {
      const double ratio = (r.next_scale * r.next_scale) / (r.scale * r.scale);
      const double err = std::abs(ratio - growth);
      const double allowed = options.skip_growth_ulps * ulp_of(growth);
      report.at(n::kSkipGrowth).observe(r.t, err, allowed, err > allowed);
    }
    const bool skip_consistent = (r.skip_error != 0.0) == (r.was_skipped && r.raw_loss != 0.0) &&
                                 r.skip_error == r.raw_loss - r.skipped_loss;
    report.at(n::kSkipErr).observe(r.t, skip_consistent ? 0.0 : 1.0, 1.0, !skip_consistent);
  }
  return report;
}

// ---------------------------------------------------------------------------------------
// Trajectories

/// Powers of two up to T, plus T itself.
inline std::vector<std::size_t> default_checkpoints(std::size_t horizon) {
  std::vector<std::size_t> out;
  for (std::size_t c = 1; c <= horizon; c *= 2) out.push_back(c);
  if (out.empty() || out.back() != horizon) out.push_back(horizon);
  return out;
}

struct RunOptions {
  bool diagnostics = false;
  std::vector<std::size_t> checkpoints;  // empty: default_checkpoints(T)
  SolverOptions solver;
  AuditOptions audit;
};

struct RunResult {
  std::uint64_t seed = 0;
  std::size_t horizon = 0;
  std::size_t benchmark = 0;
  std::vector<std::size_t> checkpoints;
  std::vector<double> regret;  // pseudo-regret at each checkpoint
  double pseudo_regret = 0.0;
  double final_scale = 0.0;  // S_{T+1}; 0 for policies without a scale
  std::size_t skip_count = 0;
  std::vector<std::size_t> pulls;
  std::vector<RoundRecord> records;  // filled with diagnostics on
  std::optional<AuditReport> audit;
};

/// Pseudo-regret of an arm sequence against the best fixed arm in hindsight over mean
/// losses; loss noise is integrated out analytically.
inline double pseudo_regret(std::span<const std::size_t> arm_sequence, const EnvironmentSpec& env,
                            std::size_t horizon) {
  const std::size_t bench = benchmark_arm(env, horizon);
  double total = 0.0;
  for (std::size_t t = 1; t <= std::min(horizon, arm_sequence.size()); ++t) {
    const auto& laws = env.arms_at(t);
    total += laws[arm_sequence[t - 1]].mean - laws[bench].mean;
  }
  return total;
}

inline RunResult run(const PolicySpec& policy, const EnvironmentSpec& env, std::size_t horizon, std::uint64_t seed,
                     const RunOptions& options = {}) {
  const auto assessment = assess_environment(env, horizon);
  if (!assessment.passes()) {
    std::string why;
    if (!assessment.moments.all_ok) why += " moment bound violated;";
    if (!assessment.gap_error.empty()) why += " " + assessment.gap_error + ";";
    if (!assessment.truncation_ok()) why += " benchmark arm is not truncated non-negative;";
    if (!assessment.covers_horizon) why += " schedule shorter than the horizon;";
    throw PreconditionFailed("environment fails run preconditions:" + why);
  }

  const std::size_t k = env.arms();
  const bool is_uniinf = std::holds_alternative<UniInfPolicy>(policy);
  const bool diagnostics = options.diagnostics && is_uniinf;

  RunResult result;
  result.seed = seed;
  result.horizon = horizon;
  result.benchmark = assessment.benchmark;
  result.checkpoints = options.checkpoints.empty() ? default_checkpoints(horizon) : options.checkpoints;
  result.pulls.assign(k, 0);
  if (diagnostics) result.records.reserve(horizon);

  const CounterStream stream(seed);
  std::vector<double> uniforms(k);
  std::vector<double> losses(k);

  std::optional<UniInfState> state;
  SimplexPoint x;
  std::optional<TruncatedUcb> ucb;
  std::optional<UcbObservation> last;
  std::optional<SimplexPoint> y_tilde;
  if (is_uniinf) {
    state = init(k, horizon);
    x = action_distribution(*state, options.solver);
    if (diagnostics) y_tilde = adjusted_benchmark(k, horizon, assessment.benchmark);
  } else if (const auto* p = std::get_if<TruncatedUcbPolicy>(&policy)) {
    ucb.emplace(k, p->alpha, p->sigma);
  }

  double regret = 0.0;
  std::size_t next_checkpoint = 0;
  for (std::size_t t = 1; t <= horizon; ++t) {
    const RoundDraws draws{&stream, k, t};
    for (std::size_t i = 0; i < k; ++i) uniforms[i] = draws.loss_uniform(i);
    sample_loss_vector(env, t, uniforms, losses);
    const double arm_u = draws.arm_uniform();

    std::size_t arm;
    if (is_uniinf) {
      arm = sample_arm(x, arm_u);
      auto [next_state, update] = observe(*state, x, arm, losses[arm]);
      SimplexPoint next_x = action_distribution(next_state, options.solver);
      if (update.outcome.was_skipped) ++result.skip_count;
      if (diagnostics) {
        RoundRecord r;
        r.t = t;
        r.arm = arm;
        r.x = x;
        r.z = posterior_point(*state, update, options.solver);
        r.scale = state->scale;
        r.next_scale = update.next_scale;
        r.threshold = update.outcome.threshold;
        r.raw_loss = losses[arm];
        r.skipped_loss = update.outcome.skipped_loss;
        r.clipped_loss = update.outcome.clipped_loss;
        r.div = bregman_divergence_log_barrier(state->scale, x, *r.z);
        r.shift = psi_shift(state->scale, update.next_scale, *y_tilde, next_x);
        r.skip_error = r.raw_loss - r.skipped_loss;
        r.was_skipped = update.outcome.was_skipped;
        r.suboptimal = arm != assessment.benchmark;
        result.records.push_back(std::move(r));
      }
      state = std::move(next_state);
      x = std::move(next_x);
    } else if (ucb) {
      arm = truncated_ucb_step(*ucb, last);
      last = UcbObservation{arm, losses[arm]};
    } else {
      arm = uniform_random_step(k, arm_u);
    }

    ++result.pulls[arm];
    const auto& laws = env.arms_at(t);
    regret += laws[arm].mean - laws[assessment.benchmark].mean;
    while (next_checkpoint < result.checkpoints.size() && result.checkpoints[next_checkpoint] == t) {
      result.regret.push_back(regret);
      ++next_checkpoint;
    }
  }

  result.pseudo_regret = regret;
  if (state) result.final_scale = state->scale;
  if (diagnostics) result.audit = decomposition_audit(result.records, k, horizon, options.audit);
  return result;
}

// ---------------------------------------------------------------------------------------
// Monte Carlo

/// Pairwise (cascade) summation; fixed association order for a given length.
inline double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.subspan(0, half)) + pairwise_sum(values.subspan(half));
}

/// Worker count: hardware concurrency, capped by HTBANDIT_THREADS when set.
inline std::size_t harness_threads() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* cap = std::getenv("HTBANDIT_THREADS")) {
    const long v = std::strtol(cap, nullptr, 10);
    if (v >= 1) n = std::min(n, static_cast<std::size_t>(v));
  }
  return n;
}

struct MonteCarloResult {
  double mean = 0.0;
  double std_error = 0.0;
  std::vector<double> regrets;
  std::vector<RunResult> runs;
};

namespace detail {
template <typename E>
[[noreturn]] void rethrow_with_rep(const E& e, std::size_t rep) {
  throw E("rep " + std::to_string(rep) + ": " + e.what());
}
}  // namespace detail

/// Independent trajectories with seeds base_seed, base_seed+1, ...; results are ordered by
/// rep regardless of how many workers ran them.
inline MonteCarloResult monte_carlo(const PolicySpec& policy, const EnvironmentSpec& env, std::size_t horizon,
                                    std::size_t reps, std::uint64_t base_seed, const RunOptions& options = {},
                                    std::size_t threads = 0) {
  if (reps < 1) throw DomainError("Monte Carlo needs at least one rep");
  MonteCarloResult out;
  out.runs.resize(reps);
  const std::size_t workers = std::min(reps, threads == 0 ? harness_threads() : threads);

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::size_t failed_rep = reps;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t rep = next++; rep < reps; rep = next++) {
      try {
        out.runs[rep] = run(policy, env, horizon, base_seed + rep, options);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (rep < failed_rep) {
          failed_rep = rep;
          failure = std::current_exception();
        }
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (failure) {
    try {
      std::rethrow_exception(failure);
    } catch (const PreconditionFailed& e) {
      detail::rethrow_with_rep(e, failed_rep);
    } catch (const NoConvergence& e) {
      detail::rethrow_with_rep(e, failed_rep);
    } catch (const DomainError& e) {
      detail::rethrow_with_rep(e, failed_rep);
    } catch (const NonFiniteInput& e) {
      detail::rethrow_with_rep(e, failed_rep);
    } catch (const Error& e) {
      detail::rethrow_with_rep(e, failed_rep);
    }
  }

  for (const auto& r : out.runs) out.regrets.push_back(r.pseudo_regret);
  const double n = static_cast<double>(reps);
  out.mean = pairwise_sum(out.regrets) / n;
  if (reps > 1) {
    std::vector<double> sq(reps);
    for (std::size_t i = 0; i < reps; ++i) sq[i] = (out.regrets[i] - out.mean) * (out.regrets[i] - out.mean);
    out.std_error = std::sqrt(pairwise_sum(sq) / (n - 1.0) / n);
  }
  return out;
}

// ---------------------------------------------------------------------------------------
// Scaling fits

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Ordinary least squares y = intercept + slope * x.
inline LineFit least_squares(std::span<const double> xs, std::span<const double> ys) {
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double e = ys[i] - (fit.intercept + fit.slope * xs[i]);
    ss_res += e * e;
  }
  // A constant series is fit exactly by a flat line.
  fit.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  return fit;
}

struct ScalingFit {
  std::vector<double> horizons;
  std::vector<double> mean_regrets;
  std::vector<double> std_errors;
  LineFit loglog;  // log R on log T
  LineFit logt;    // R on log T
};

inline ScalingFit fit_scaling(std::span<const double> horizons, std::span<const double> mean_regrets,
                              std::span<const double> std_errors = {}) {
  if (horizons.size() != mean_regrets.size()) throw DomainError("horizon and regret lists differ in length");
  if (horizons.size() < 3) throw DomainError("need >= 3 horizons for a scaling fit");
  for (std::size_t i = 1; i < horizons.size(); ++i) {
    if (!(horizons[i] > horizons[i - 1])) throw DomainError("horizon grid must be strictly increasing");
  }
  for (double r : mean_regrets) {
    if (!(r > 0.0)) throw DomainError("scaling fit needs positive regrets (log undefined)");
  }
  ScalingFit fit;
  fit.horizons.assign(horizons.begin(), horizons.end());
  fit.mean_regrets.assign(mean_regrets.begin(), mean_regrets.end());
  fit.std_errors.assign(std_errors.begin(), std_errors.end());
  std::vector<double> log_t, log_r;
  for (std::size_t i = 0; i < horizons.size(); ++i) {
    log_t.push_back(std::log(horizons[i]));
    log_r.push_back(std::log(mean_regrets[i]));
  }
  fit.loglog = least_squares(log_t, log_r);
  fit.logt = least_squares(log_t, fit.mean_regrets);
  return fit;
}

}  // namespace htbandit
