#include <doctest.h>

#include <cmath>

#include "sprp/errors.hpp"
#include "sprp/randproj.hpp"
#include "test_helpers.hpp"

using namespace sprp;

namespace {

double orthonormality_error(const Eigen::MatrixXd& u) {
  return (u.transpose() * u - Eigen::MatrixXd::Identity(u.cols(), u.cols())).cwiseAbs().maxCoeff();
}

double mean_subspace_distance(const Eigen::MatrixXd& K, const Eigen::MatrixXd& exact, int rank,
                              int power, int seeds) {
  double total = 0.0;
  for (int s = 0; s < seeds; ++s) {
    SketchConfig cfg{rank, rank, power, static_cast<std::uint64_t>(100 + s)};
    total += subspace_distance(approx_eigs(K, cfg).vectors, exact);
  }
  return total / seeds;
}

}  // namespace

TEST_CASE("gaussian_sketch is deterministic and has the stated moments") {
  const Eigen::MatrixXd a = gaussian_sketch(200, 50, 9);
  const Eigen::MatrixXd b = gaussian_sketch(200, 50, 9);
  CHECK(a == b);
  CHECK(a != gaussian_sketch(200, 50, 10));

  const int k = 25;
  const Eigen::MatrixXd big = gaussian_sketch(400, k, 3);  // 10^4 entries
  const double n = static_cast<double>(big.size());
  const double mean = big.mean();
  const double var = (big.array() - mean).square().sum() / (n - 1.0);
  CHECK(std::abs(mean) < 3.0 * (1.0 / std::sqrt(k)) / std::sqrt(n));
  CHECK(std::abs(var * k - 1.0) < 0.05);
}

TEST_CASE("gaussian_sketch rejects k > n") {
  CHECK_THROWS_AS(gaussian_sketch(5, 6, 1), ConfigError);
  CHECK_THROWS_AS(gaussian_sketch(5, 0, 1), ConfigError);
}

TEST_CASE("form_projection powers") {
  const auto loc = test::uniform_locations(50, 1);
  const Eigen::MatrixXd K = test::matern_matrix(loc, 0.3, 0.5);
  const Eigen::MatrixXd omega = gaussian_sketch(50, 10, 2);
  CHECK(form_projection(K, omega, 0) == omega);
  CHECK(form_projection(Eigen::MatrixXd::Identity(50, 50), omega, 1) == omega);
  const Eigen::MatrixXd dense = (K * K) * omega;
  CHECK((form_projection(K, omega, 2) - dense).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(form_projection(K, omega, 3), ConfigError);
  CHECK_THROWS_AS(form_projection(K, gaussian_sketch(40, 10, 2), 1), ConfigError);
}

TEST_CASE("nystrom_eig is exact for a diagonal matrix with full sampling") {
  Eigen::VectorXd diag(5);
  diag << 2.0, 5.0, 1.0, 4.0, 3.0;
  const Eigen::MatrixXd K = diag.asDiagonal();
  const auto out = nystrom_eig(K, Eigen::MatrixXd::Identity(5, 5), 5);
  Eigen::VectorXd expected(5);
  expected << 5.0, 4.0, 3.0, 2.0, 1.0;
  CHECK((out.values - expected).cwiseAbs().maxCoeff() < 1e-10);
  const int axis[] = {1, 3, 4, 0, 2};
  for (int j = 0; j < 5; ++j) CHECK(std::abs(std::abs(out.vectors(axis[j], j)) - 1.0) < 1e-10);
}

TEST_CASE("nystrom_eig rank-1 matrix") {
  Eigen::VectorXd v(6);
  v << 1.0, -2.0, 0.5, 3.0, 0.0, 1.5;
  const Eigen::MatrixXd K = v * v.transpose();
  const auto out = nystrom_eig(K, test::random_matrix(6, 3, 4), 1);
  CHECK(std::abs(out.values(0) - v.squaredNorm()) < 1e-8);
  const Eigen::VectorXd u = v.normalized();
  CHECK(std::abs(std::abs(out.vectors.col(0).dot(u)) - 1.0) < 1e-8);
  CHECK_THROWS_AS(nystrom_eig(K, test::random_matrix(6, 3, 4), 2), RankDeficiencyError);
}

TEST_CASE("nystrom_eig with full sampling reconstructs K") {
  const auto loc = test::uniform_locations(100, 7);
  const Eigen::MatrixXd K = test::matern_matrix(loc, 0.1, 0.5);
  const auto out = nystrom_eig(K, test::random_matrix(100, 100, 8), 100);
  const Eigen::MatrixXd rebuilt = out.vectors * out.values.asDiagonal() * out.vectors.transpose();
  CHECK((rebuilt - K).norm() < 1e-8);
  const auto exact = exact_eigs(K, 100);
  CHECK(eigenvalue_error(out.values, exact.values) < 1e-8);
}

TEST_CASE("approx_eigs invariants on a Matern matrix") {
  const auto loc = test::uniform_locations(300, 11);
  const Eigen::MatrixXd K = test::matern_matrix(loc, 0.2, 2.5);
  const double lmax = exact_eigs(K, 1).values(0);
  for (int power : {0, 1, 2}) {
    const auto out = approx_eigs(K, {30, 30, power, 5});
    CHECK(orthonormality_error(out.vectors) < 1e-10);
    CHECK(out.values.minCoeff() >= 0.0);
    for (int j = 1; j < out.rank(); ++j) CHECK(out.values(j) <= out.values(j - 1));
    CHECK(out.values.maxCoeff() <= lmax * (1.0 + 1e-8));
    const Eigen::MatrixXd rebuilt = out.vectors * out.values.asDiagonal() * out.vectors.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(rebuilt, Eigen::EigenvaluesOnly);
    CHECK(eig.eigenvalues().minCoeff() > -1e-10);
  }
}

TEST_CASE("approx_eigs determinism and identity input") {
  const auto loc = test::uniform_locations(120, 2);
  const Eigen::MatrixXd K = test::matern_matrix(loc, 0.3, 1.5);
  const auto a = approx_eigs(K, {10, 10, 1, 77});
  const auto b = approx_eigs(K, {10, 10, 1, 77});
  CHECK(a.vectors == b.vectors);
  CHECK(a.values == b.values);

  const auto id = approx_eigs(Eigen::MatrixXd::Identity(40, 40), {8, 4, 1, 3});
  CHECK((id.values.array() - 1.0).abs().maxCoeff() < 1e-8);
}

TEST_CASE("sketch scaling does not change the eigencomponents") {
  const auto loc = test::uniform_locations(80, 5);
  const Eigen::MatrixXd K = test::matern_matrix(loc, 0.3, 2.5);
  const Eigen::MatrixXd omega = gaussian_sketch(80, 20, 6);
  const auto a = nystrom_eig(K, form_projection(K, omega, 1), 10);
  const auto b = nystrom_eig(K, form_projection(K, 37.0 * omega, 1), 10);
  CHECK((a.values - b.values).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(subspace_distance(a.vectors, b.vectors) < 1e-8);
}

TEST_CASE("SketchConfig validation") {
  CHECK_THROWS_AS(SketchConfig({0, 0, 1, 1}).validate(10), ConfigError);
  CHECK_THROWS_AS(SketchConfig({5, 6, 1, 1}).validate(10), ConfigError);
  CHECK_THROWS_AS(SketchConfig({5, 5, 3, 1}).validate(10), ConfigError);
  CHECK_NOTHROW(SketchConfig({5, -1, 2, 1}).validate(10));
  CHECK(SketchConfig({5, -1, 1, 1}).sketch_size() == 10);
}

TEST_CASE("deterministic_subsample_eigs") {
  const Eigen::MatrixXd sel = subsample_selector(30, 12, 4);
  CHECK((sel.colwise().sum().array() == 1.0).all());
  CHECK(sel.rowwise().sum().maxCoeff() == 1.0);
  CHECK(sel.sum() == 12.0);

  const auto loc = test::uniform_locations(60, 3);
  const Eigen::MatrixXd K = test::matern_matrix(loc, 0.2, 0.5);
  const auto full = deterministic_subsample_eigs(K, 60, 20, 9);
  const auto exact = exact_eigs(K, 20);
  CHECK(eigenvalue_error(full.values, exact.values) < 1e-8);
  CHECK(subspace_distance(full.vectors, exact.vectors) < 1e-6);
}

TEST_CASE("subspace_distance and eigenvalue_error") {
  const Eigen::MatrixXd u = Eigen::Vector2d(1.0, 0.0);
  const Eigen::MatrixXd v = Eigen::Vector2d(0.0, 1.0);
  CHECK(std::abs(subspace_distance(u, v) - std::sqrt(2.0)) < 1e-15);
  CHECK(subspace_distance(u, u) == 0.0);
  const Eigen::MatrixXd q = exact_eigs(test::matern_matrix(test::uniform_locations(30, 1), 0.3, 0.5), 4).vectors;
  CHECK(subspace_distance(q, -q) < 1e-14);
  CHECK_THROWS_AS(subspace_distance(q, q.leftCols(3)), ConfigError);

  CHECK(eigenvalue_error(Eigen::Vector2d(3, 1), Eigen::Vector2d(3, 1)) == 0.0);
  CHECK(eigenvalue_error(Eigen::Vector2d(3, 1), Eigen::Vector2d(3, 0)) == 1.0);
  CHECK_THROWS_AS(eigenvalue_error(Eigen::Vector2d(3, 1), Eigen::Vector3d(3, 1, 0)), ConfigError);

  // Projector identity oracle.
  const Eigen::MatrixXd a = exact_eigs(test::matern_matrix(test::uniform_locations(30, 2), 0.3, 0.5), 4).vectors;
  const double dense = (q * q.transpose() - a * a.transpose()).norm();
  CHECK(std::abs(subspace_distance(q, a) - dense) < 1e-12);
}

TEST_CASE("orient_eigenvectors gives positive column sums") {
  Eigen::MatrixXd v = test::random_matrix(20, 4, 3);
  orient_eigenvectors(v);
  for (int j = 0; j < 4; ++j) CHECK(v.col(j).sum() > 0.0);
}

TEST_CASE("power iterations improve the subspace (20-seed means)") {
  const auto loc = test::uniform_locations(500, 2024);
  const Eigen::MatrixXd K = test::matern_matrix(loc, 0.3, 0.5);
  const Eigen::MatrixXd exact = exact_eigs(K, 50).vectors;
  const double d0 = mean_subspace_distance(K, exact, 50, 0, 20);
  const double d1 = mean_subspace_distance(K, exact, 50, 1, 20);
  const double d2 = mean_subspace_distance(K, exact, 50, 2, 20);
  CHECK(d1 < d0);
  CHECK(d2 <= d1);

  double det = 0.0;
  for (int s = 0; s < 20; ++s) det += subspace_distance(deterministic_subsample_eigs(K, 100, 50, 100 + s).vectors, exact);
  CHECK(d1 < det / 20.0);
}

TEST_CASE("randomized eigenvalues beat column subsampling for a smooth kernel") {
  const auto loc = test::uniform_locations(1000, 2024);
  const Eigen::MatrixXd K = test::matern_matrix(loc, 0.3, 2.5);
  const Eigen::VectorXd exact = exact_eigs(K, 50).values;
  double rnd = 0.0;
  double det = 0.0;
  for (int s = 0; s < 20; ++s) {
    rnd += eigenvalue_error(approx_eigs(K, {50, 50, 1, static_cast<std::uint64_t>(100 + s)}).values, exact);
    det += eigenvalue_error(deterministic_subsample_eigs(K, 100, 50, 100 + s).values, exact);
  }
  CHECK(rnd < det);
}
