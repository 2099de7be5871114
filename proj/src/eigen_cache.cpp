#include "sprp/eigen_cache.hpp"

#include <bit>
#include <cmath>

#include "sprp/errors.hpp"
#include "sprp/rng.hpp"

namespace sprp {

EigenCache::EigenCache(Locations locations, double nu, SketchConfig sketch, OmegaPolicy policy,
                       bool exact)
    : locations_(std::move(locations)), nu_(nu), sketch_(sketch), policy_(policy), exact_(exact) {
  if (!exact_) sketch_.validate(locations_.rows());
}

std::shared_ptr<EigenCache> EigenCache::areal(const ArealGraph& graph, SketchConfig sketch,
                                              bool exact) {
  std::shared_ptr<EigenCache> cache(new EigenCache());
  cache->sketch_ = sketch;
  cache->exact_ = exact;
  const Eigen::MatrixXd cov = generalized_inverse(icar_precision(graph));
  EigenApprox eig = exact ? exact_eigs(cov, sketch.rank) : approx_eigs(cov, sketch);
  eig.config = sketch;
  cache->fixed_ = std::make_shared<const EigenApprox>(std::move(eig));
  cache->computed_ = 1;
  return cache;
}

std::uint64_t EigenCache::sketch_seed_for(double phi) const {
  if (policy_ == OmegaPolicy::PerChain) return sketch_.seed;
  return substream_seed(sketch_.seed, std::bit_cast<std::uint64_t>(phi));
}

std::size_t EigenCache::sketches_computed() const {
  std::lock_guard lock(mutex_);
  return computed_;
}

std::shared_ptr<const EigenApprox> EigenCache::get(double phi) {
  if (fixed_) return fixed_;
  if (!(phi > 0.0) || !std::isfinite(phi)) throw DomainError("range phi must be positive");
  {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(phi);
    if (it != entries_.end()) return it->second;
  }
  // Computed outside the lock; a concurrent duplicate computes the same value.
  const Eigen::MatrixXd K = build_corr_matrix(locations_, {1.0, phi, nu_}).entries;
  EigenApprox eig;
  if (exact_) {
    eig = exact_eigs(K, sketch_.rank);
    eig.config = sketch_;
  } else {
    SketchConfig cfg = sketch_;
    cfg.seed = sketch_seed_for(phi);
    eig = approx_eigs(K, cfg);
  }
  eig.source_phi = phi;
  auto ptr = std::make_shared<const EigenApprox>(std::move(eig));

  std::lock_guard lock(mutex_);
  auto [it, inserted] = entries_.emplace(phi, ptr);
  if (inserted) {
    ++computed_;
    order_.push_back(phi);
    while (order_.size() > capacity_) {
      entries_.erase(order_.front());
      order_.pop_front();
    }
  }
  return it->second;
}

double PhiGrid::snap(double phi) const {
  if (!enabled()) return phi;
  const double step = (hi - lo) / (points - 1);
  const double idx = std::round((phi - lo) / step);
  if (idx < 0 || idx > points - 1) return phi;  // outside: caller rejects
  return value(static_cast<int>(idx));
}

}  // namespace sprp
