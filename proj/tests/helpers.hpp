#pragma once

#include <random>
#include <vector>

#include "htbandit/environment.hpp"

namespace htbandit::testing {

inline EnvironmentSpec stochastic(const std::vector<double>& means, double spread = 10.0, double tail_prob = 0.01,
                                  double alpha = 1.5, double sigma = 1.0) {
  EnvironmentSpec env;
  std::vector<ThreePointArm> arms;
  for (double m : means) arms.push_back(ThreePointArm{m, spread, tail_prob});
  env.kind = StochasticArms{arms};
  env.alpha = alpha;
  env.sigma = sigma;
  return env;
}

// Hand-rolled generators for the property tests.
struct Gen {
  std::mt19937_64 rng;
  explicit Gen(std::uint64_t seed) : rng(seed) {}

  double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
  std::size_t index(std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); }

  std::vector<double> losses(std::size_t k, double spread) {
    std::vector<double> v(k);
    for (auto& x : v) x = real(-spread, spread);
    return v;
  }

  std::vector<double> simplex(std::size_t k) {
    std::vector<double> v(k);
    double s = 0.0;
    for (auto& x : v) s += (x = real(0.05, 1.0));
    for (auto& x : v) x /= s;
    return v;
  }
};

}  // namespace htbandit::testing
