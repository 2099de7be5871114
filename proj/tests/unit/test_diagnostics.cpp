#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "sprp/diagnostics.hpp"
#include "sprp/errors.hpp"

using namespace sprp;

namespace {

Eigen::VectorXd iid_normal(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> norm(0.0, 1.0);
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) out(i) = norm(gen);
  return out;
}

Eigen::VectorXd ar1(Eigen::Index n, double rho, std::uint64_t seed) {
  const Eigen::VectorXd e = iid_normal(n, seed);
  Eigen::VectorXd out(n);
  out(0) = e(0) / std::sqrt(1.0 - rho * rho);
  for (Eigen::Index i = 1; i < n; ++i) out(i) = rho * out(i - 1) + e(i);
  return out;
}

}  // namespace

TEST_CASE("ess of independent draws") {
  const auto r = ess(iid_normal(10000, 1));
  CHECK_FALSE(r.constant);
  CHECK(std::abs(r.value / 10000.0 - 1.0) < 0.15);
  CHECK(r.value <= 10000.0);
}

TEST_CASE("ess of an AR(1) path") {
  const double n = 100000.0;
  const auto r = ess(ar1(100000, 0.9, 2));
  const double expected = n * (1.0 - 0.9) / (1.0 + 0.9);
  CHECK(std::abs(r.value / expected - 1.0) < 0.2);
}

TEST_CASE("ess of a constant path") {
  const auto r = ess(Eigen::VectorXd::Constant(500, 3.2));
  CHECK(r.constant);
  CHECK(r.value == 0.0);
  CHECK_THROWS_AS(ess(Eigen::VectorXd::Zero(99)), ConfigError);
}

TEST_CASE("autocovariance matches direct summation") {
  const Eigen::VectorXd x = ar1(300, 0.5, 3);
  const Eigen::VectorXd fft = autocovariance(x, 10);
  const double mean = x.mean();
  for (Eigen::Index k = 0; k <= 10; ++k) {
    double direct = 0.0;
    for (Eigen::Index i = 0; i + k < x.size(); ++i) direct += (x(i) - mean) * (x(i + k) - mean);
    direct /= static_cast<double>(x.size());
    CHECK(std::abs(fft(k) - direct) < 1e-10);
  }
}

TEST_CASE("batch-means standard error") {
  const double se = batch_means_se(iid_normal(1000000, 4));
  CHECK(std::abs(se / 0.001 - 1.0) < 0.15);
  const auto checks = mcmc_se_check({"a"}, iid_normal(1000000, 5), 0.02);
  CHECK(checks[0].pass);

  Eigen::MatrixXd noisy = 10.0 * iid_normal(100, 6);
  CHECK_FALSE(mcmc_se_check({"b"}, noisy, 0.02)[0].pass);
}

TEST_CASE("mcmc_se_check threshold is strict") {
  Eigen::MatrixXd path = ar1(400, 0.3, 7);
  const double se = batch_means_se(path.col(0));
  CHECK_FALSE(mcmc_se_check({"x"}, path, se)[0].pass);
  CHECK(mcmc_se_check({"x"}, path, std::nextafter(se, 1.0))[0].pass);
  CHECK(mcmc_se_check({"x"}, path, se)[0].se == se);
  CHECK_THROWS_AS(mcmc_se_check({"x", "y"}, path, 0.1), ConfigError);
}

TEST_CASE("max_abs_cross_correlation") {
  Eigen::MatrixXd s(1000, 3);
  s.col(0) = iid_normal(1000, 8);
  s.col(1) = iid_normal(1000, 9);
  s.col(2) = -2.0 * s.col(0);
  CHECK(std::abs(max_abs_cross_correlation(s) - 1.0) < 1e-12);
  CHECK(max_abs_cross_correlation(s.leftCols(2)) < 0.1);
}

TEST_CASE("quantile type 7") {
  Eigen::VectorXd v(5);
  v << 5, 1, 4, 2, 3;
  CHECK(quantile(v, 0.0) == 1.0);
  CHECK(quantile(v, 1.0) == 5.0);
  CHECK(quantile(v, 0.5) == 3.0);
  CHECK(quantile(v, 0.1) == doctest::Approx(1.4));
  CHECK_THROWS_AS(quantile(Eigen::VectorXd(), 0.5), ConfigError);
}
