#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "sprp/mcmc.hpp"

namespace sprp::detail {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

inline bool accept(double log_ratio, Rng& rng) {
  if (std::isnan(log_ratio)) return false;
  if (log_ratio >= 0.0) return true;
  return std::log(rng.uniform()) < log_ratio;
}

inline double inv_gamma_log_prior(double v, double shape, double scale) {
  return -(shape + 1.0) * std::log(v) - scale / v;
}

/// Robbins-Monro adaptation of a log proposal scale, plus acceptance counts.
struct Adapter {
  double log_scale = 0.0;
  double target = 0.44;
  long tries = 0;
  long accepts = 0;
  bool frozen = false;  // a zero scale stays exactly zero

  Adapter() = default;
  Adapter(double scale, double tgt)
      : log_scale(std::log(std::max(scale, 1e-300))), target(tgt), frozen(scale <= 0.0) {}

  double scale() const { return frozen ? 0.0 : std::exp(log_scale); }
  void adapt(double accepted_fraction, int t) {
    if (frozen) return;
    const double step = std::pow(t + 10.0, -0.6);
    log_scale = std::clamp(log_scale + step * (accepted_fraction - target), std::log(1e-8),
                           std::log(1e3));
  }
  void count(int acc, int total) {
    accepts += acc;
    tries += total;
  }
  double rate() const { return tries > 0 ? static_cast<double>(accepts) / tries : 0.0; }
};

Chain allocate_chain(const SpatialDataset& data, const ModelSpec& spec, const McmcConfig& config,
                     std::uint64_t seed, Eigen::Index m);

void store_state(Chain& chain, Eigen::Index row, int iteration, const ChainState& s, bool nugget);

inline bool store_iteration(const McmcConfig& config, int t) {
  const int burnin = config.burnin_iterations();
  return t >= burnin && (t - burnin + 1) % config.thin == 0;
}

std::size_t default_threads();

}  // namespace sprp::detail
