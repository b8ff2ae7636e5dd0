#pragma once

// Portable random variates. std::mt19937_64 has a fully specified output
// sequence, but the std:: distributions do not, so every variate used by the
// library is derived here from raw 64-bit words.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <vector>

namespace psconrl {

// splitmix64 finalizer; used to derive independent seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed,
                                    std::uint64_t stream) noexcept {
  return mix_seed(mix_seed(seed) ^ mix_seed(stream + 0x5851f42d4c957f2dULL));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform on the open interval (0, 1); safe to take logs of.
  double uniform_open() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Box-Muller; one draw per call, the sine branch is discarded.
  double normal() {
    const double u1 = uniform_open();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  // log of a Gamma(shape, 1) variate. Marsaglia-Tsang for shape >= 1; for
  // shape < 1 the boost Gamma(shape) = Gamma(shape + 1) * U^(1/shape) is
  // applied in log space so tiny shapes never underflow.
  double log_gamma_variate(double shape) {
    if (shape < 1.0) {
      const double boosted = log_gamma_variate(shape + 1.0);
      return boosted + std::log(uniform_open()) / shape;
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = 0.0;
      double v = 0.0;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform_open();
      const double x2 = x * x;
      if (u < 1.0 - 0.0331 * x2 * x2) return std::log(d * v);
      if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) {
        return std::log(d * v);
      }
    }
  }

  double gamma(double shape) { return std::exp(log_gamma_variate(shape)); }

  // Fills `out` with a Dirichlet(alpha) draw. Normalization is done with a
  // log-sum-exp so the result is a valid probability vector for any alpha > 0.
  void dirichlet(std::span<const double> alpha, std::span<double> out) {
    double max_log = -INFINITY;
    for (std::size_t i = 0; i < alpha.size(); ++i) {
      out[i] = log_gamma_variate(alpha[i]);
      max_log = std::max(max_log, out[i]);
    }
    double total = 0.0;
    for (double& x : out) {
      x = std::exp(x - max_log);
      total += x;
    }
    for (double& x : out) x /= total;
  }

  // Index drawn from an unnormalized nonnegative weight vector.
  int categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    const double u = uniform() * total;
    double acc = 0.0;
    int last_positive = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] <= 0.0) continue;
      acc += weights[i];
      last_positive = static_cast<int>(i);
      if (u < acc) return last_positive;
    }
    return last_positive;
  }

  int uniform_int(int n) {
    return static_cast<int>(uniform() * n);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace psconrl
