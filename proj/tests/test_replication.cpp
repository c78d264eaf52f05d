#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Cholesky>

#include "lmft/replication.hpp"

using namespace lmft;

namespace {

ReplicatedGaussian random_instance(std::mt19937_64& rng, int n, int w) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> uu(0.5, 3.0);
  for (;;) {
    Eigen::MatrixXd A(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) A(i, j) = g(rng);
    ReplicatedGaussian rg;
    rg.B0 = A * A.transpose() + Eigen::MatrixXd::Identity(n, n);
    rg.b.resize(n);
    for (int i = 0; i < n; ++i) rg.b[i] = 0.2 * g(rng);
    rg.u = uu(rng);
    rg.w = w;
    // Keep only draws whose unreplicated covariance is positive definite.
    ReplicatedGaussian one = rg;
    one.w = 1;
    Eigen::LLT<Eigen::MatrixXd> llt(build_replicated(one));
    if (llt.info() == Eigen::Success) return rg;
  }
}

}  // namespace

TEST_CASE("build_replicated block layout") {
  ReplicatedGaussian rg;
  rg.B0 = Eigen::MatrixXd::Identity(2, 2) * 3.0;
  rg.b = Eigen::VectorXd::Constant(2, 0.5);
  rg.u = 2.0;
  rg.w = 3;
  const Eigen::MatrixXd B = build_replicated(rg);
  REQUIRE(B.rows() == 5);
  CHECK(B(0, 0) == 3.0);
  CHECK(B(0, 2) == 0.5);
  CHECK(B(1, 4) == 0.5);
  CHECK(B(2, 2) == 6.0);  // u * w on the copies' diagonal
  CHECK(B(2, 3) == 0.0);  // copies are independent
  CHECK((B - B.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("weight one collapses to the plain system") {
  std::mt19937_64 rng(1);
  const ReplicatedGaussian rg = random_instance(rng, 3, 1);
  double err = 0.0;
  CHECK(check_lemma_determinant(rg, &err));
  CHECK(err < 1e-12);
}

TEST_CASE("determinant lemma on a hand-checkable scalar case") {
  // n = 0: det(B_w) = (u w)^w for w copies of an independent variable,
  // so det(B_w)/(u w)^w = 1 = det(B_1)/u with u = 1.
  ReplicatedGaussian rg;
  rg.B0.resize(0, 0);
  rg.b.resize(0);
  rg.u = 1.0;
  rg.w = 4;
  double err = 0.0;
  CHECK(check_lemma_determinant(rg, &err));
  CHECK(err < 1e-12);
}

TEST_CASE("theorem difference on the scalar worked case") {
  // n = 1 base variable uncorrelated with the new one, u = 1, w = 2:
  // log G(y_w) - log G(y_1) must be -(1/2 log 1 + log 2 + 1/2 log 2pi).
  ReplicatedGaussian rg;
  rg.B0 = Eigen::MatrixXd::Identity(1, 1);
  rg.b = Eigen::VectorXd::Zero(1);
  rg.u = 1.0;
  rg.w = 2;
  Eigen::VectorXd y(1);
  y << 0.3;
  const double x = -0.7;

  const Eigen::MatrixXd Bw = build_replicated(rg);
  Eigen::VectorXd yw(3);
  yw << 0.3, x, x;
  Eigen::MatrixXd B1(2, 2);
  B1 << 1.0, 0.0, 0.0, 1.0;
  Eigen::VectorXd y1(2);
  y1 << 0.3, x;
  auto logpdf = [](const Eigen::VectorXd& v, const Eigen::MatrixXd& S) {
    Eigen::LLT<Eigen::MatrixXd> llt(S);
    return -0.5 * v.dot(llt.solve(v)) -
           llt.matrixLLT().diagonal().array().log().sum() -
           0.5 * v.size() * std::log(2.0 * M_PI);
  };
  const double diff = logpdf(yw, Bw) - logpdf(y1, B1);
  const double expected = -(std::log(2.0) + 0.5 * std::log(2.0 * M_PI));
  CHECK(diff == doctest::Approx(expected).epsilon(1e-12));

  double err = 0.0;
  CHECK(check_theorem(rg, y, x, &err));
  CHECK(err < 1e-12);
}

TEST_CASE("all lemma checks pass on random instances") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    const int n = 1 + static_cast<int>(rng() % 5);
    const int w = 1 + static_cast<int>(rng() % 5);
    const ReplicatedGaussian rg = random_instance(rng, n, w);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y[i] = g(rng);
    const double x = g(rng);
    double err = 0.0;
    CHECK(check_lemma_determinant(rg, &err));
    CHECK(check_lemma_inverse(rg, &err));
    CHECK(check_lemma_quadform(rg, y, x, &err));
    CHECK(check_theorem(rg, y, x, &err));
  }
}

TEST_CASE("corollary with mixed weights") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> g(0.0, 1.0);
  // Small off-diagonals keep both covariance assemblies positive definite.
  std::uniform_real_distribution<double> off(-0.05, 0.05);
  std::uniform_real_distribution<double> uu(0.8, 3.0);
  for (int t = 0; t < 20; ++t) {
    const int n = 2 + static_cast<int>(rng() % 3);
    std::vector<CorollarySpec> specs(n);
    for (int i = 0; i < n; ++i) {
      specs[i].b.resize(i);
      for (int j = 0; j < i; ++j) specs[i].b[j] = off(rng);
      specs[i].u = uu(rng);
      specs[i].w = 1 + static_cast<int>(rng() % 3);
    }
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y[i] = g(rng);
    double err = 0.0;
    CHECK(check_corollary(specs, y, &err));
    CHECK(err < 1e-8);
  }
}

TEST_CASE("oracle suite reports clean runs") {
  const OracleReport rep = run_oracle_suite(99, 100);
  CHECK(rep.failures == 0);
  CHECK(rep.instances >= 400);
  CHECK(rep.max_abs_error < 1e-9);
}
