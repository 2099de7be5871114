#pragma once

#include <Eigen/Dense>

namespace sprp {

/// Point locations, one row per site; 2 or 3 columns.
using Locations = Eigen::MatrixXd;

struct MaternParams {
  double sigma2 = 1.0;
  double phi = 0.2;
  double nu = 2.5;

  void validate() const;
};

/// Dense Matérn correlation matrix together with the parameters that built it.
struct CorrelationMatrix {
  Eigen::MatrixXd entries;
  Locations locations;
  double phi = 0.0;
  double nu = 0.0;
  /// Set when two or more locations coincide, making the matrix singular.
  bool has_duplicates = false;
};

/// Binary symmetric adjacency of an areal partition.
struct ArealGraph {
  Eigen::MatrixXd adjacency;

  int size() const { return static_cast<int>(adjacency.rows()); }
  void validate() const;
  int connected_components() const;
};

struct IcarPrecision {
  Eigen::MatrixXd Q;
  int rank = 0;
};

/// Matérn correlation at distance h using the sqrt(2 nu) h / phi scaling.
/// nu in {0.5, 1.5, 2.5} use closed forms; other values go through K_nu.
double matern_corr(double h, double phi, double nu);

/// General-nu evaluation through the modified Bessel function, no fast paths.
double matern_corr_bessel(double h, double phi, double nu);

CorrelationMatrix build_corr_matrix(const Locations& locations, const MaternParams& params);

/// Correlations between every row of `a` and every row of `b` (a.rows() x b.rows()).
Eigen::MatrixXd cross_corr(const Locations& a, const Locations& b, double phi, double nu);

double max_pairwise_distance(const Locations& locations);

IcarPrecision icar_precision(const ArealGraph& graph);

/// Moore-Penrose pseudoinverse of a symmetric PSD matrix from its full
/// eigendecomposition. Eigenvalues below tol * lambda_max are treated as zero.
Eigen::MatrixXd generalized_inverse(const IcarPrecision& q, double tol = 1e-10);
Eigen::MatrixXd generalized_inverse(const Eigen::MatrixXd& q, double tol = 1e-10);

/// Rook-adjacency lattice with rows x cols cells, numbered row-major.
ArealGraph lattice_graph(int rows, int cols);

/// Cell-centre coordinates in [0,1]^2 for the lattice_graph numbering.
Locations lattice_centroids(int rows, int cols);

}  // namespace sprp
