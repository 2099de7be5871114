#include "sprp/randproj.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "sprp/errors.hpp"
#include "sprp/rng.hpp"

namespace sprp {

namespace {

constexpr double kCoreDropTol = 1e-12;

}  // namespace

void orient_eigenvectors(Eigen::MatrixXd& vectors) {
  const double tiny = 1e-8 * std::sqrt(static_cast<double>(vectors.rows()));
  for (Eigen::Index j = 0; j < vectors.cols(); ++j) {
    auto col = vectors.col(j);
    double key = col.sum();
    if (std::abs(key) < tiny) {
      Eigen::Index i = 0;
      col.cwiseAbs().maxCoeff(&i);
      key = col(i);
    }
    if (key < 0.0) col = -col;
  }
}

void SketchConfig::validate(Eigen::Index n) const {
  if (rank < 1) throw ConfigError("sketch rank must be at least 1");
  if (power < 0 || power > 2) throw ConfigError("sketch power must be 0, 1 or 2");
  if (sketch_size() > n) {
    throw ConfigError("sketch size m + l = " + std::to_string(sketch_size()) +
                      " exceeds matrix dimension " + std::to_string(n));
  }
}

Eigen::MatrixXd gaussian_sketch(Eigen::Index n, Eigen::Index k, std::uint64_t seed) {
  if (k < 1 || k > n) throw ConfigError("sketch size must satisfy 1 <= k <= n");
  Rng rng(seed);
  const double sd = 1.0 / std::sqrt(static_cast<double>(k));
  Eigen::MatrixXd omega(n, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) omega(i, j) = sd * rng.normal();
  }
  return omega;
}

Eigen::MatrixXd form_projection(const Eigen::MatrixXd& K, const Eigen::MatrixXd& omega, int alpha) {
  if (alpha < 0 || alpha > 2) throw ConfigError("power alpha must be 0, 1 or 2");
  if (K.rows() != K.cols() || K.cols() != omega.rows()) {
    throw ConfigError("dimension mismatch between K and omega");
  }
  Eigen::MatrixXd phi = omega;
  for (int a = 0; a < alpha; ++a) phi = K * phi;
  return phi;
}

EigenApprox nystrom_eig(const Eigen::MatrixXd& K, const Eigen::MatrixXd& phi_mat, int rank) {
  const Eigen::Index n = K.rows();
  const Eigen::Index k = phi_mat.cols();
  if (K.cols() != n || phi_mat.rows() != n) throw ConfigError("dimension mismatch in nystrom_eig");
  if (rank < 1 || rank > k) throw ConfigError("rank must satisfy 1 <= m <= k");
  if (!phi_mat.allFinite()) throw Error("sampling matrix has non-finite entries");

  Eigen::HouseholderQR<Eigen::MatrixXd> qr(phi_mat);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, k);

  const Eigen::MatrixXd kq = K * q;
  Eigen::MatrixXd core = q.transpose() * kq;
  core = 0.5 * (core + core.transpose());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(core);
  if (eig.info() != Eigen::Success) throw Error("core eigendecomposition failed");
  // Ascending order from the solver; walk from the top.
  const Eigen::VectorXd& lam = eig.eigenvalues();
  const double top = lam(k - 1);
  if (!(top > 0.0)) throw RankDeficiencyError(0, rank);
  Eigen::Index kept = 0;
  while (kept < k && lam(k - 1 - kept) > kCoreDropTol * top) ++kept;
  if (kept < rank) throw RankDeficiencyError(static_cast<int>(kept), rank);

  Eigen::MatrixXd scaled(k, kept);
  for (Eigen::Index j = 0; j < kept; ++j) {
    scaled.col(j) = eig.eigenvectors().col(k - 1 - j) / std::sqrt(lam(k - 1 - j));
  }
  const Eigen::MatrixXd c = kq * scaled;

  Eigen::BDCSVD<Eigen::MatrixXd> svd(c, Eigen::ComputeThinU);
  EigenApprox out;
  out.vectors = svd.matrixU().leftCols(rank);
  out.values = svd.singularValues().head(rank).array().square();
  orient_eigenvectors(out.vectors);
  out.config.rank = rank;
  out.config.oversample = static_cast<int>(k) - rank;
  return out;
}

EigenApprox approx_eigs(const Eigen::MatrixXd& K, const SketchConfig& config) {
  config.validate(K.rows());
  const Eigen::MatrixXd omega = gaussian_sketch(K.rows(), config.sketch_size(), config.seed);
  EigenApprox out = nystrom_eig(K, form_projection(K, omega, config.power), config.rank);
  out.config = config;
  return out;
}

Eigen::MatrixXd subsample_selector(Eigen::Index n, int k, std::uint64_t seed) {
  if (k < 1 || k > n) throw ConfigError("subsample size must satisfy 1 <= k <= n");
  std::vector<Eigen::Index> perm(n);
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  Rng rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng.engine());
  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(n, k);
  for (int j = 0; j < k; ++j) phi(perm[j], j) = 1.0;
  return phi;
}

EigenApprox deterministic_subsample_eigs(const Eigen::MatrixXd& K, int k, int rank,
                                         std::uint64_t seed) {
  EigenApprox out = nystrom_eig(K, subsample_selector(K.rows(), k, seed), rank);
  out.config.seed = seed;
  out.config.power = 0;
  return out;
}

EigenApprox exact_eigs(const Eigen::MatrixXd& K, int rank) {
  const Eigen::Index n = K.rows();
  if (rank < 1 || rank > n) throw ConfigError("rank must satisfy 1 <= m <= n");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(K);
  if (eig.info() != Eigen::Success) throw Error("eigendecomposition failed");
  EigenApprox out;
  out.vectors.resize(n, rank);
  out.values.resize(rank);
  for (int j = 0; j < rank; ++j) {
    out.vectors.col(j) = eig.eigenvectors().col(n - 1 - j);
    out.values(j) = std::max(0.0, eig.eigenvalues()(n - 1 - j));
  }
  orient_eigenvectors(out.vectors);
  out.config.rank = rank;
  out.config.oversample = static_cast<int>(n) - rank;
  out.config.power = 0;
  return out;
}

double subspace_distance(const Eigen::MatrixXd& U, const Eigen::MatrixXd& V) {
  if (U.rows() != V.rows() || U.cols() != V.cols()) {
    throw ConfigError("subspace_distance needs equally shaped matrices");
  }
  // ||P_U - P_V||_F^2 = 2m - 2||U^T V||_F^2 = 2 ||(I - P_U) V||_F^2; the
  // residual form avoids cancellation when the subspaces nearly coincide.
  const Eigen::MatrixXd residual = V - U * (U.transpose() * V);
  return std::sqrt(2.0) * residual.norm();
}

double eigenvalue_error(const Eigen::VectorXd& lambda_hat, const Eigen::VectorXd& lambda_true) {
  if (lambda_hat.size() != lambda_true.size()) {
    throw ConfigError("eigenvalue vectors must have equal length");
  }
  return (lambda_hat - lambda_true).norm();
}

}  // namespace sprp
