#pragma once

// Comparison policies. TruncatedUcb is parameter-aware: it is handed (alpha, sigma).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <vector>

#include "htbandit/errors.hpp"

namespace htbandit {

/// Truncated-empirical-mean UCB for losses (lower index is better).
///
/// Observations are kept as a value histogram: the truncation level moves every round, and
/// the discrete laws used here produce only a handful of distinct values.
class TruncatedUcb {
 public:
  TruncatedUcb(std::size_t arms, double alpha, double sigma)
      : alpha_(alpha), sigma_(sigma), pulls_(arms, 0), observations_(arms) {
    if (arms < 2) throw DomainError("truncated UCB needs at least two arms");
    if (!(alpha > 1.0 && alpha <= 2.0)) throw DomainError("alpha must lie in (1, 2]");
    if (!(sigma > 0.0)) throw DomainError("truncated UCB needs sigma > 0");
  }

  std::size_t arms() const { return pulls_.size(); }
  std::size_t round() const { return round_; }  // 1-based index of the next round
  std::size_t pulls(std::size_t arm) const { return pulls_[arm]; }

  void record(std::size_t arm, double loss) {
    ++pulls_[arm];
    ++observations_[arm][loss];
    ++round_;
  }

  /// Mean of the observations with |X| <= level, zeros counted for the rest.
  double truncated_mean(std::size_t arm, double level) const {
    if (pulls_[arm] == 0) return 0.0;
    double sum = 0.0;
    for (const auto& [value, count] : observations_[arm]) {
      if (std::abs(value) <= level) sum += value * static_cast<double>(count);
    }
    return sum / static_cast<double>(pulls_[arm]);
  }

  double truncation_level(std::size_t arm) const {
    const double n = static_cast<double>(pulls_[arm]);
    return sigma_ * std::pow(n / std::log(static_cast<double>(round_)), 1.0 / alpha_);
  }

  double width(std::size_t arm) const {
    const double n = static_cast<double>(pulls_[arm]);
    return 4.0 * sigma_ * std::pow(std::log(static_cast<double>(round_)) / n, 1.0 - 1.0 / alpha_);
  }

  double index(std::size_t arm) const { return truncated_mean(arm, truncation_level(arm)) - width(arm); }

  std::size_t select() const {
    if (round_ <= arms()) return round_ - 1;
    std::size_t best = 0;
    double best_index = index(0);
    for (std::size_t i = 1; i < arms(); ++i) {
      const double value = index(i);
      if (value < best_index) {
        best = i;
        best_index = value;
      }
    }
    return best;
  }

 private:
  double alpha_;
  double sigma_;
  std::size_t round_ = 1;
  std::vector<std::size_t> pulls_;
  std::vector<std::map<double, std::size_t>> observations_;
};

struct UcbObservation {
  std::size_t arm;
  double loss;
};

/// Records the previous round's observation (if any) and returns the arm for this round.
inline std::size_t truncated_ucb_step(TruncatedUcb& state, std::optional<UcbObservation> last) {
  if (last) state.record(last->arm, last->loss);
  return state.select();
}

inline std::size_t uniform_random_step(std::size_t arms, double u) {
  if (arms < 2) throw DomainError("uniform play needs at least two arms");
  const auto arm = static_cast<std::size_t>(u * static_cast<double>(arms));
  return std::min(arm, arms - 1);
}

}  // namespace htbandit
