#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>

namespace sprp {

/// SplitMix64 finaliser; used to derive independent substream seeds.
std::uint64_t mix_seed(std::uint64_t x);

/// Seed of substream `stream` of a parent seed. Distinct (seed, stream) pairs
/// give statistically independent generators.
std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream);

/// Seedable generator with the draws the samplers need.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix_seed(seed)) {}

  static Rng substream(std::uint64_t seed, std::uint64_t stream) {
    return Rng(substream_seed(seed, stream));
  }

  double uniform();  // (0, 1)
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
  double normal(double mean, double sd) { return mean + sd * normal(); }
  double gamma(double shape, double scale);
  /// Inverse-gamma with density proportional to x^{-shape-1} exp(-scale / x).
  double inv_gamma(double shape, double scale);
  int poisson(double mean);
  /// Normal(mean, sd^2) truncated to [0, inf) if `positive`, else (-inf, 0).
  double truncated_normal(double mean, double sd, bool positive);
  Eigen::VectorXd normal_vector(Eigen::Index n);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

/// Standard normal draw restricted to [lower, inf).
double sample_lower_truncated_std_normal(Rng& rng, double lower);

double normal_cdf(double x);
/// log Phi(x), accurate in the far left tail.
double log_normal_cdf(double x);

}  // namespace sprp
