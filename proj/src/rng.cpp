#include "sprp/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace sprp {

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix_seed(mix_seed(seed) ^ mix_seed(stream + 0x632BE59BD9B4E019ULL));
}

double Rng::uniform() {
  // 53 random bits mapped to the open interval (0, 1).
  const std::uint64_t bits = engine_() >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

double Rng::gamma(double shape, double scale) {
  return std::gamma_distribution<double>(shape, scale)(engine_);
}

double Rng::inv_gamma(double shape, double scale) { return 1.0 / gamma(shape, 1.0 / scale); }

int Rng::poisson(double mean) { return std::poisson_distribution<int>(mean)(engine_); }

Eigen::VectorXd Rng::normal_vector(Eigen::Index n) {
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z(i) = normal();
  return z;
}

double sample_lower_truncated_std_normal(Rng& rng, double lower) {
  if (lower < 0.45) {
    // Plain rejection accepts with probability >= 1 - Phi(0.45) ~ 0.33.
    for (;;) {
      const double z = rng.normal();
      if (z >= lower) return z;
    }
  }
  // Exponential proposal with the optimal rate (Robert, 1995).
  const double rate = 0.5 * (lower + std::sqrt(lower * lower + 4.0));
  for (;;) {
    const double z = lower - std::log(rng.uniform()) / rate;
    const double d = z - rate;
    if (rng.uniform() <= std::exp(-0.5 * d * d)) return z;
  }
}

double Rng::truncated_normal(double mean, double sd, bool positive) {
  // Y >= 0  <=>  Z >= -mean/sd ;  Y < 0  <=>  -Z > mean/sd.
  if (positive) {
    double y = mean + sd * sample_lower_truncated_std_normal(*this, -mean / sd);
    return y < 0.0 ? 0.0 : y;
  }
  double y = mean - sd * sample_lower_truncated_std_normal(*this, mean / sd);
  return y < 0.0 ? y : -std::numeric_limits<double>::denorm_min();
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double log_normal_cdf(double x) {
  if (x > -30.0) return std::log(normal_cdf(x));
  // Asymptotic Mills-ratio expansion for the far tail.
  const double x2 = x * x;
  return -0.5 * x2 - std::log(-x) - 0.5 * std::log(2.0 * std::numbers::pi) +
         std::log1p(-1.0 / x2 + 3.0 / (x2 * x2));
}

}  // namespace sprp
