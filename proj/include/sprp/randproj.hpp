#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>

namespace sprp {

/// Sketch parameters: target rank m, oversampling l (k = m + l columns are
/// sampled) and the power alpha applied in Phi = K^alpha Omega.
struct SketchConfig {
  int rank = 50;
  int oversample = -1;  ///< negative selects the default l = m
  int power = 1;
  std::uint64_t seed = 1;

  int oversampling() const { return oversample < 0 ? rank : oversample; }
  int sketch_size() const { return rank + oversampling(); }
  void validate(Eigen::Index n) const;
};

/// Approximate leading eigenpairs: orthonormal columns in `vectors`, eigenvalues
/// in descending order in `values`.
struct EigenApprox {
  Eigen::MatrixXd vectors;
  Eigen::VectorXd values;
  SketchConfig config;
  std::optional<double> source_phi;

  int rank() const { return static_cast<int>(values.size()); }
  Eigen::Index n() const { return vectors.rows(); }
};

/// Flips each column so its entries sum to a positive value (largest-magnitude
/// entry positive when the sum is near zero). Keeps bases at nearby phi aligned.
void orient_eigenvectors(Eigen::MatrixXd& vectors);

/// n x k matrix with i.i.d. N(0, 1/k) entries (standard deviation 1/sqrt(k)).
Eigen::MatrixXd gaussian_sketch(Eigen::Index n, Eigen::Index k, std::uint64_t seed);

/// K^alpha * omega by repeated multiplication.
Eigen::MatrixXd form_projection(const Eigen::MatrixXd& K, const Eigen::MatrixXd& omega, int alpha);

/// Nystrom eigen-approximation of K from the sampling matrix phi_mat.
///
/// The column space of phi_mat is first orthonormalised (thin QR); the
/// Nystrom approximation K (Phi (Phi^T K Phi)^+ Phi^T) K depends on Phi only
/// through that space. Then
///   K11 = Q^T K Q = V L V^T,  C = (K Q) V L^{-1/2},  C = U D W^T,
/// and the first m columns of U and the first m entries of D^2 are returned.
/// Core eigenvalues below 1e-12 * max are dropped; RankDeficiencyError is
/// thrown when fewer than m survive.
EigenApprox nystrom_eig(const Eigen::MatrixXd& K, const Eigen::MatrixXd& phi_mat, int rank);

/// Full randomized pipeline: gaussian_sketch -> form_projection -> nystrom_eig.
EigenApprox approx_eigs(const Eigen::MatrixXd& K, const SketchConfig& config);

/// Nystrom with Phi a row-permuted [I_k, 0]^T, i.e. k randomly chosen columns.
EigenApprox deterministic_subsample_eigs(const Eigen::MatrixXd& K, int k, int rank,
                                         std::uint64_t seed);

/// Column-selector matrix used by deterministic_subsample_eigs.
Eigen::MatrixXd subsample_selector(Eigen::Index n, int k, std::uint64_t seed);

/// Leading `rank` eigenpairs from a dense symmetric eigendecomposition.
EigenApprox exact_eigs(const Eigen::MatrixXd& K, int rank);

/// ||U U^T - V V^T||_F for matrices with orthonormal columns.
double subspace_distance(const Eigen::MatrixXd& U, const Eigen::MatrixXd& V);

double eigenvalue_error(const Eigen::VectorXd& lambda_hat, const Eigen::VectorXd& lambda_true);

}  // namespace sprp
