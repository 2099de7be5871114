#pragma once

#include <deque>
#include <map>
#include <memory>
#include <mutex>

#include "sprp/covariance.hpp"
#include "sprp/randproj.hpp"

namespace sprp {

/// How the Gaussian test matrix is drawn across range-parameter values.
enum class OmegaPolicy {
  PerPhi,    ///< fresh Omega for every distinct phi, seeded from (seed, phi)
  PerChain,  ///< one Omega reused for every phi
};

/// Read-through cache of eigencomponents of R(phi) (point data) or of the
/// ICAR covariance (areal data, no phi). The result for a given phi is a pure
/// function of (locations, nu, sketch config, phi), so eviction never changes
/// sampler output. Safe to share between chains.
class EigenCache {
 public:
  EigenCache(Locations locations, double nu, SketchConfig sketch,
             OmegaPolicy policy = OmegaPolicy::PerPhi, bool exact = false);

  /// Areal covariance: generalized inverse of the ICAR precision, decomposed once.
  static std::shared_ptr<EigenCache> areal(const ArealGraph& graph, SketchConfig sketch,
                                           bool exact = false);

  std::shared_ptr<const EigenApprox> get(double phi);

  bool has_phi() const { return !fixed_; }
  const Locations& locations() const { return locations_; }
  double nu() const { return nu_; }
  const SketchConfig& sketch() const { return sketch_; }
  OmegaPolicy policy() const { return policy_; }
  std::uint64_t sketch_seed_for(double phi) const;
  std::size_t sketches_computed() const;

 private:
  EigenCache() = default;

  Locations locations_;
  double nu_ = 0.0;
  SketchConfig sketch_;
  OmegaPolicy policy_ = OmegaPolicy::PerPhi;
  bool exact_ = false;
  std::shared_ptr<const EigenApprox> fixed_;

  mutable std::mutex mutex_;
  std::map<double, std::shared_ptr<const EigenApprox>> entries_;
  std::deque<double> order_;
  std::size_t capacity_ = 512;
  std::size_t computed_ = 0;
};

/// Uniform grid of admissible phi values; proposals are snapped to it.
struct PhiGrid {
  double lo = 0.01;
  double hi = 1.5;
  int points = 0;  ///< 0 disables the grid (continuous phi)

  bool enabled() const { return points >= 2; }
  double snap(double phi) const;
  double value(int i) const { return lo + (hi - lo) * i / (points - 1); }
};

}  // namespace sprp
