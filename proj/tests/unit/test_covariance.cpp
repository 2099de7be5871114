#include <doctest.h>

#include <cmath>
#include <random>

#include "sprp/covariance.hpp"
#include "sprp/errors.hpp"

using namespace sprp;

TEST_CASE("matern_corr is one at zero distance") {
  for (double nu : {0.3, 0.5, 1.5, 2.5, 3.7}) {
    for (double phi : {0.05, 0.2, 1.0}) CHECK(matern_corr(0.0, phi, nu) == 1.0);
  }
}

TEST_CASE("matern_corr nu=0.5 is exponential and agrees with the Bessel route") {
  const double phi = 0.3;
  for (int i = 0; i <= 60; ++i) {
    const double h = 3.0 * phi * i / 60.0;
    CHECK(std::abs(matern_corr(h, phi, 0.5) - std::exp(-h / phi)) < 1e-10);
    CHECK(std::abs(matern_corr_bessel(h, phi, 0.5) - std::exp(-h / phi)) < 1e-10);
  }
}

TEST_CASE("matern_corr nu=2.5 closed form") {
  const double phi = 0.2;
  for (double h : {0.01, 0.05, 0.1, 0.3, 0.7}) {
    const double u = std::sqrt(5.0) * h / phi;
    const double expected = (1.0 + u + 5.0 * h * h / (3.0 * phi * phi)) * std::exp(-u);
    CHECK(std::abs(matern_corr(h, phi, 2.5) - expected) < 1e-14);
    CHECK(std::abs(matern_corr_bessel(h, phi, 2.5) - expected) < 1e-10);
  }
}

TEST_CASE("matern_corr nu=1.5 closed form matches Bessel") {
  for (double h : {0.02, 0.1, 0.4}) {
    CHECK(std::abs(matern_corr(h, 0.25, 1.5) - matern_corr_bessel(h, 0.25, 1.5)) < 1e-10);
  }
}

TEST_CASE("matern_corr is nonincreasing in distance") {
  for (double nu : {0.5, 1.0, 2.5, 4.0}) {
    double prev = 1.0;
    for (int i = 1; i <= 200; ++i) {
      const double r = matern_corr(0.01 * i, 0.2, nu);
      CHECK(r <= prev + 1e-15);
      CHECK(r >= 0.0);
      prev = r;
    }
  }
}

TEST_CASE("matern_corr rejects invalid parameters") {
  CHECK_THROWS_AS(matern_corr(0.1, 0.0, 0.5), DomainError);
  CHECK_THROWS_AS(matern_corr(0.1, -1.0, 0.5), DomainError);
  CHECK_THROWS_AS(matern_corr(0.1, 0.2, 0.0), DomainError);
  CHECK_THROWS_AS(matern_corr(-0.1, 0.2, 0.5), DomainError);
}

TEST_CASE("build_corr_matrix two points") {
  Locations loc(2, 2);
  loc << 0.1, 0.2, 0.4, 0.6;
  const auto r = build_corr_matrix(loc, {1.0, 0.3, 0.5});
  CHECK(std::abs(r.entries(0, 1) - std::exp(-0.5 / 0.3)) < 1e-14);
  CHECK(r.entries(0, 0) == 1.0);
  CHECK(r.entries(0, 1) == r.entries(1, 0));
  CHECK_FALSE(r.has_duplicates);
}

TEST_CASE("build_corr_matrix collinear product property") {
  Locations loc(3, 2);
  loc << 0.0, 0.0, 0.1, 0.0, 0.2, 0.0;
  const auto r = build_corr_matrix(loc, {1.0, 0.2, 0.5});
  CHECK(std::abs(r.entries(0, 2) - r.entries(0, 1) * r.entries(1, 2)) < 1e-14);
}

TEST_CASE("build_corr_matrix flags duplicates") {
  Locations loc(3, 2);
  loc << 0.5, 0.5, 0.5, 0.5, 0.1, 0.9;
  const auto r = build_corr_matrix(loc, {1.0, 0.2, 2.5});
  CHECK(r.has_duplicates);
  CHECK(r.entries(0, 1) == 1.0);

  Locations same(2, 2);
  same << 0.3, 0.3, 0.3, 0.3;
  CHECK_THROWS_AS(build_corr_matrix(same, {1.0, 0.2, 2.5}), ConfigError);
}

TEST_CASE("build_corr_matrix input validation") {
  Locations one(1, 2);
  one << 0.0, 0.0;
  CHECK_THROWS_AS(build_corr_matrix(one, {1.0, 0.2, 2.5}), ConfigError);
  Locations bad(2, 2);
  bad << 0.0, NAN, 1.0, 1.0;
  CHECK_THROWS_AS(build_corr_matrix(bad, {1.0, 0.2, 2.5}), DomainError);
}

TEST_CASE("build_corr_matrix is PSD for 1000 random sites") {
  std::mt19937_64 gen(42);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Locations loc(1000, 2);
  for (Eigen::Index i = 0; i < loc.rows(); ++i) {
    loc(i, 0) = unif(gen);
    loc(i, 1) = unif(gen);
  }
  for (double nu : {0.5, 2.5}) {
    auto r = build_corr_matrix(loc, {1.0, 0.2, nu});
    CHECK((r.entries - r.entries.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(r.entries.maxCoeff() <= 1.0);
    CHECK(r.entries.minCoeff() >= -1.0);
    r.entries.diagonal().array() += 1e-8;
    Eigen::LLT<Eigen::MatrixXd> llt(r.entries);
    CHECK(llt.info() == Eigen::Success);
  }
}

TEST_CASE("cross_corr matches build_corr_matrix") {
  Locations loc(4, 2);
  loc << 0.0, 0.0, 0.3, 0.1, 0.7, 0.2, 0.9, 0.9;
  const auto r = build_corr_matrix(loc, {1.0, 0.25, 1.5});
  const auto c = cross_corr(loc, loc, 0.25, 1.5);
  CHECK((r.entries - c).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("icar_precision small graphs") {
  ArealGraph g2{Eigen::MatrixXd(2, 2)};
  g2.adjacency << 0, 1, 1, 0;
  const auto q2 = icar_precision(g2);
  Eigen::MatrixXd e2(2, 2);
  e2 << 1, -1, -1, 1;
  CHECK(q2.Q == e2);
  CHECK(q2.rank == 1);

  ArealGraph g3{Eigen::MatrixXd::Zero(3, 3)};
  g3.adjacency(0, 1) = g3.adjacency(1, 0) = 1;
  g3.adjacency(1, 2) = g3.adjacency(2, 1) = 1;
  const auto q3 = icar_precision(g3);
  Eigen::MatrixXd e3(3, 3);
  e3 << 1, -1, 0, -1, 2, -1, 0, -1, 1;
  CHECK(q3.Q == e3);
}

TEST_CASE("icar_precision lattice row sums are exactly zero") {
  const auto g = lattice_graph(30, 30);
  CHECK(g.connected_components() == 1);
  const auto q = icar_precision(g);
  CHECK((Eigen::RowVectorXd::Ones(q.Q.rows()) * q.Q).cwiseAbs().maxCoeff() == 0.0);
  CHECK(q.Q.rowwise().sum().cwiseAbs().maxCoeff() == 0.0);
  CHECK(q.rank == 899);
}

TEST_CASE("icar_precision rejects malformed adjacency") {
  ArealGraph asym{Eigen::MatrixXd::Zero(3, 3)};
  asym.adjacency(0, 1) = 1;
  CHECK_THROWS_AS(icar_precision(asym), StructuralError);
  ArealGraph loop{Eigen::MatrixXd::Zero(2, 2)};
  loop.adjacency(0, 0) = 1;
  CHECK_THROWS_AS(icar_precision(loop), StructuralError);
  ArealGraph weighted{Eigen::MatrixXd::Zero(2, 2)};
  weighted.adjacency(0, 1) = weighted.adjacency(1, 0) = 2;
  CHECK_THROWS_AS(icar_precision(weighted), StructuralError);
}

TEST_CASE("generalized_inverse simple cases") {
  Eigen::MatrixXd d = Eigen::Vector2d(2.0, 0.0).asDiagonal();
  Eigen::MatrixXd expected = Eigen::Vector2d(0.5, 0.0).asDiagonal();
  CHECK((generalized_inverse(d) - expected).cwiseAbs().maxCoeff() < 1e-14);

  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(5, 5);
  CHECK((generalized_inverse(id) - id).cwiseAbs().maxCoeff() < 1e-14);

  ArealGraph g2{Eigen::MatrixXd(2, 2)};
  g2.adjacency << 0, 1, 1, 0;
  const auto q = icar_precision(g2);
  const Eigen::MatrixXd qp = generalized_inverse(q);
  CHECK((q.Q * qp * q.Q - q.Q).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("generalized_inverse satisfies the Penrose conditions on a 20x20 lattice") {
  const auto q = icar_precision(lattice_graph(20, 20));
  const Eigen::MatrixXd& a = q.Q;
  const Eigen::MatrixXd g = generalized_inverse(q);
  CHECK((a * g * a - a).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((g * a * g - g).cwiseAbs().maxCoeff() < 1e-8);
  const Eigen::MatrixXd ag = a * g;
  const Eigen::MatrixXd ga = g * a;
  CHECK((ag - ag.transpose()).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((ga - ga.transpose()).cwiseAbs().maxCoeff() < 1e-8);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g);
  CHECK(eig.eigenvalues().minCoeff() > -1e-10);
}

TEST_CASE("lattice helpers") {
  const auto g = lattice_graph(3, 4);
  CHECK(g.size() == 12);
  CHECK(g.adjacency.sum() == 2.0 * (3 * 3 + 2 * 4));
  const auto c = lattice_centroids(3, 4);
  CHECK(c.rows() == 12);
  CHECK(c.minCoeff() > 0.0);
  CHECK(c.maxCoeff() < 1.0);
  ArealGraph two{Eigen::MatrixXd::Zero(4, 4)};
  two.adjacency(0, 1) = two.adjacency(1, 0) = 1;
  two.adjacency(2, 3) = two.adjacency(3, 2) = 1;
  CHECK(two.connected_components() == 2);
}
