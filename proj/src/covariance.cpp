#include "sprp/covariance.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <queue>
#include <vector>

#include "sprp/errors.hpp"

namespace sprp {

void MaternParams::validate() const {
  if (!(sigma2 > 0.0) || !(phi > 0.0) || !(nu > 0.0)) {
    throw DomainError("Matern parameters must be strictly positive");
  }
}

namespace {

void check_corr_params(double phi, double nu) {
  if (!(phi > 0.0) || !std::isfinite(phi)) throw DomainError("range phi must be positive");
  if (!(nu > 0.0) || !std::isfinite(nu)) throw DomainError("smoothness nu must be positive");
}

}  // namespace

double matern_corr_bessel(double h, double phi, double nu) {
  check_corr_params(phi, nu);
  if (h < 0.0) throw DomainError("distance must be nonnegative");
  if (h == 0.0) return 1.0;
  const double u = std::sqrt(2.0 * nu) * h / phi;
  if (u > 700.0) return 0.0;
  const double k = std::cyl_bessel_k(nu, u);
  if (k <= 0.0) return 0.0;
  const double log_rho =
      (1.0 - nu) * std::log(2.0) - std::lgamma(nu) + nu * std::log(u) + std::log(k);
  return std::min(1.0, std::exp(log_rho));
}

double matern_corr(double h, double phi, double nu) {
  check_corr_params(phi, nu);
  if (h < 0.0) throw DomainError("distance must be nonnegative");
  if (h == 0.0) return 1.0;
  if (nu == 0.5) return std::exp(-h / phi);
  if (nu == 1.5) {
    const double u = std::sqrt(3.0) * h / phi;
    return (1.0 + u) * std::exp(-u);
  }
  if (nu == 2.5) {
    const double u = std::sqrt(5.0) * h / phi;
    return (1.0 + u + u * u / 3.0) * std::exp(-u);
  }
  return matern_corr_bessel(h, phi, nu);
}

Eigen::MatrixXd cross_corr(const Locations& a, const Locations& b, double phi, double nu) {
  check_corr_params(phi, nu);
  if (a.cols() != b.cols()) throw ConfigError("location dimension mismatch");
  Eigen::MatrixXd out(a.rows(), b.rows());
  for (Eigen::Index j = 0; j < b.rows(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      out(i, j) = matern_corr((a.row(i) - b.row(j)).norm(), phi, nu);
    }
  }
  return out;
}

CorrelationMatrix build_corr_matrix(const Locations& locations, const MaternParams& params) {
  check_corr_params(params.phi, params.nu);
  const Eigen::Index n = locations.rows();
  if (n < 2) throw ConfigError("at least two locations are required");
  if (!locations.allFinite()) throw DomainError("location coordinates must be finite");

  CorrelationMatrix out;
  out.locations = locations;
  out.phi = params.phi;
  out.nu = params.nu;
  out.entries.resize(n, n);
  int duplicates = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    out.entries(j, j) = 1.0;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double h = (locations.row(i) - locations.row(j)).norm();
      if (h == 0.0) ++duplicates;
      const double r = matern_corr(h, params.phi, params.nu);
      out.entries(i, j) = r;
      out.entries(j, i) = r;
    }
  }
  if (duplicates > 0) {
    if (duplicates == static_cast<int>(n * (n - 1) / 2)) {
      throw ConfigError("at least two distinct locations are required");
    }
    out.has_duplicates = true;
    spdlog::warn("{} duplicate location pair(s): correlation matrix is near singular", duplicates);
  }
  return out;
}

double max_pairwise_distance(const Locations& locations) {
  double best = 0.0;
  for (Eigen::Index i = 0; i < locations.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < locations.rows(); ++j) {
      best = std::max(best, (locations.row(i) - locations.row(j)).norm());
    }
  }
  return best;
}

void ArealGraph::validate() const {
  const Eigen::Index n = adjacency.rows();
  if (adjacency.cols() != n) throw StructuralError("adjacency must be square");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (adjacency(i, i) != 0.0) throw StructuralError("adjacency diagonal must be zero");
    for (Eigen::Index j = 0; j < n; ++j) {
      const double a = adjacency(i, j);
      if (a != 0.0 && a != 1.0) throw StructuralError("adjacency entries must be 0 or 1");
      if (a != adjacency(j, i)) throw StructuralError("adjacency must be symmetric");
    }
  }
}

int ArealGraph::connected_components() const {
  const int n = size();
  std::vector<int> label(n, -1);
  int count = 0;
  for (int s = 0; s < n; ++s) {
    if (label[s] >= 0) continue;
    std::queue<int> frontier;
    frontier.push(s);
    label[s] = count;
    while (!frontier.empty()) {
      const int v = frontier.front();
      frontier.pop();
      for (int w = 0; w < n; ++w) {
        if (adjacency(v, w) != 0.0 && label[w] < 0) {
          label[w] = count;
          frontier.push(w);
        }
      }
    }
    ++count;
  }
  return count;
}

IcarPrecision icar_precision(const ArealGraph& graph) {
  graph.validate();
  IcarPrecision out;
  // Integer-valued entries: row sums are exactly zero in floating point.
  out.Q = -graph.adjacency;
  out.Q.diagonal() = graph.adjacency.rowwise().sum();
  out.rank = graph.size() - graph.connected_components();
  return out;
}

Eigen::MatrixXd generalized_inverse(const Eigen::MatrixXd& q, double tol) {
  if (q.rows() != q.cols()) throw ConfigError("generalized inverse needs a square matrix");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(q);
  if (eig.info() != Eigen::Success) throw Error("eigendecomposition failed");
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const double cutoff = tol * lambda.cwiseAbs().maxCoeff();
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(lambda.size());
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda(i) > cutoff) inv(i) = 1.0 / lambda(i);
  }
  const Eigen::MatrixXd& v = eig.eigenvectors();
  Eigen::MatrixXd out = v * inv.asDiagonal() * v.transpose();
  return 0.5 * (out + out.transpose());
}

Eigen::MatrixXd generalized_inverse(const IcarPrecision& q, double tol) {
  return generalized_inverse(q.Q, tol);
}

ArealGraph lattice_graph(int rows, int cols) {
  if (rows < 1 || cols < 1) throw ConfigError("lattice dimensions must be positive");
  const int n = rows * cols;
  ArealGraph g;
  g.adjacency = Eigen::MatrixXd::Zero(n, n);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int v = r * cols + c;
      if (c + 1 < cols) {
        g.adjacency(v, v + 1) = 1.0;
        g.adjacency(v + 1, v) = 1.0;
      }
      if (r + 1 < rows) {
        g.adjacency(v, v + cols) = 1.0;
        g.adjacency(v + cols, v) = 1.0;
      }
    }
  }
  return g;
}

Locations lattice_centroids(int rows, int cols) {
  Locations out(rows * cols, 2);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      out(r * cols + c, 0) = (c + 0.5) / cols;
      out(r * cols + c, 1) = (r + 0.5) / rows;
    }
  }
  return out;
}

}  // namespace sprp
