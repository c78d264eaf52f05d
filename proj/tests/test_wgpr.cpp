#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "lmft/wgpr.hpp"

using namespace lmft;

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

CovExpr smooth_plus_noise(double c, double l, double eps) {
  return CovExpr::sum({CovExpr::prod({CovExpr::cn(Param::free_seed(c)),
                                      CovExpr::rbf(Param::free_seed(l))}),
                       CovExpr::wn(Param::free_seed(eps))});
}

Eigen::VectorXd linspace(double a, double b, int n) {
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x[i] = a + (b - a) * i / (n - 1);
  return x;
}

}  // namespace

TEST_CASE("log_gauss_pdf scalar closed forms") {
  Eigen::VectorXd y(1);
  Eigen::MatrixXd S(1, 1);
  y << 0.0;
  S << 1.0;
  CHECK(log_gauss_pdf(y, S) == doctest::Approx(-0.5 * kLog2Pi).epsilon(1e-15));
  y << 1.0;
  CHECK(log_gauss_pdf(y, S) ==
        doctest::Approx(-0.5 - 0.5 * kLog2Pi).epsilon(1e-15));
  S << 4.0;
  y << 2.0;
  CHECK(log_gauss_pdf(y, S) ==
        doctest::Approx(-0.5 - 0.5 * std::log(4.0) - 0.5 * kLog2Pi)
            .epsilon(1e-15));
}

TEST_CASE("log_gauss_pdf diagonal case matches the sum of scalars") {
  Eigen::VectorXd y(3);
  y << 0.5, -1.0, 2.0;
  Eigen::VectorXd vars(3);
  vars << 1.0, 2.0, 0.5;
  const Eigen::MatrixXd S = vars.asDiagonal();
  double expect = 0.0;
  for (int i = 0; i < 3; ++i) {
    expect += -0.5 * y[i] * y[i] / vars[i] - 0.5 * std::log(vars[i]) -
              0.5 * kLog2Pi;
  }
  CHECK(log_gauss_pdf(y, S) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("log_gauss_pdf rejects hopeless matrices") {
  Eigen::VectorXd y(2);
  y << 1.0, 1.0;
  Eigen::MatrixXd S(2, 2);
  S << 1.0, 2.0, 2.0, 1.0;  // eigenvalues 3, -1
  CHECK_THROWS_AS(log_gauss_pdf(y, S), std::runtime_error);
}

TEST_CASE("normalize_mean1 drops and rescales") {
  Eigen::VectorXd raw(4);
  raw << 2.0, 0.0, 4.0, 1e-15;
  const WeightVector wv = normalize_mean1(raw);
  const auto idx = wv.retained_indices();
  REQUIRE(idx.size() == 2);
  CHECK(idx[0] == 0);
  CHECK(idx[1] == 2);
  const Eigen::VectorXd w = wv.retained_normalized();
  CHECK(w.mean() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(w[1] / w[0] == doctest::Approx(2.0).epsilon(1e-15));

  CHECK_THROWS_AS(normalize_mean1(Eigen::VectorXd::Constant(2, -1.0)),
                  std::invalid_argument);
  CHECK_THROWS_AS(normalize_mean1(Eigen::VectorXd::Zero(3)),
                  std::invalid_argument);
}

TEST_CASE("weighted_cov formulas by hand") {
  const CovExpr e = smooth_plus_noise(2.0, 1.0, 0.5);
  Eigen::VectorXd X(2), w(2);
  X << 0.0, 10.0;
  w << 2.0, 0.5;
  const Eigen::MatrixXd full =
      weighted_cov(e, X, w, WeightingMode::FullDiagonal);
  const Eigen::MatrixXd noise = weighted_cov(e, X, w, WeightingMode::NoiseOnly);
  // Unweighted diagonal is c + eps = 2.5; full mode divides it by w_i,
  // noise mode only scales the eps share.
  CHECK(full(0, 0) == doctest::Approx(2.5 / 2.0).epsilon(1e-14));
  CHECK(full(1, 1) == doctest::Approx(2.5 / 0.5).epsilon(1e-14));
  CHECK(noise(0, 0) == doctest::Approx(2.0 + 0.5 / 2.0).epsilon(1e-14));
  CHECK(noise(1, 1) == doctest::Approx(2.0 + 0.5 / 0.5).epsilon(1e-14));
  CHECK(full(0, 1) == noise(0, 1));  // off-diagonals untouched
}

TEST_CASE("all-ones weights reproduce the plain log marginal") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int t = 0; t < 25; ++t) {
    const int n = 4 + static_cast<int>(rng() % 8);
    Eigen::VectorXd X(n), y(n);
    for (int i = 0; i < n; ++i) {
      X[i] = 3.0 * i + 0.3 * g(rng);
      y[i] = g(rng);
    }
    const CovExpr e = smooth_plus_noise(1.0 + t * 0.1, 1.5, 0.7);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
    const double plain = log_gauss_pdf(y, cov_matrix(e, X));
    for (WeightingMode mode :
         {WeightingMode::FullDiagonal, WeightingMode::NoiseOnly}) {
      for (ObjectiveForm form : {ObjectiveForm::Full, ObjectiveForm::Simplified}) {
        CHECK(std::abs(weighted_log_marginal(e, X, y, ones, mode, form) -
                       plain) < 1e-12);
      }
    }
  }
}

TEST_CASE("full and simplified forms differ by the diagonal correction") {
  Eigen::VectorXd X = linspace(0.0, 20.0, 6);
  Eigen::VectorXd y(6);
  y << 0.3, -1.0, 0.7, 2.0, -0.2, 0.5;
  Eigen::VectorXd w(6);
  w << 0.5, 0.8, 1.0, 1.4, 1.2, 1.1;
  const CovExpr e = smooth_plus_noise(1.0, 1.0, 2.0);
  for (WeightingMode mode :
       {WeightingMode::FullDiagonal, WeightingMode::NoiseOnly}) {
    const double d = mode == WeightingMode::FullDiagonal
                         ? cov_diag_value(e, true)
                         : cov_diag_value(e, true) - cov_diag_value(e, false);
    const double full =
        weighted_log_marginal(e, X, y, w, mode, ObjectiveForm::Full);
    const double simp =
        weighted_log_marginal(e, X, y, w, mode, ObjectiveForm::Simplified);
    CHECK(full - simp ==
          doctest::Approx(-(w.array() - 1.0).sum() / 2.0 * std::log(d))
              .epsilon(1e-12));
  }
  // Mean-1 weights make the correction vanish for any single diagonal level.
  Eigen::VectorXd wm = w.array() * (6.0 / w.sum());
  CHECK(weighted_log_marginal(e, X, y, wm, WeightingMode::NoiseOnly,
                              ObjectiveForm::Full) ==
        doctest::Approx(weighted_log_marginal(e, X, y, wm,
                                              WeightingMode::NoiseOnly,
                                              ObjectiveForm::Simplified))
            .epsilon(1e-14));
}

TEST_CASE("analytic gradient matches central differences") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> uw(0.2, 1.0);
  for (int t = 0; t < 20; ++t) {
    const int n = 6;
    Eigen::VectorXd X(n), y(n), w(n);
    for (int i = 0; i < n; ++i) {
      X[i] = 2.0 * i + 0.2 * g(rng);
      y[i] = g(rng);
      w[i] = uw(rng);  // weights <= 1 keep full-diagonal mode PD
    }
    CovExpr e = CovExpr::sum(
        {CovExpr::prod({CovExpr::cn(Param::free_seed(1.2)),
                        CovExpr::rbf(Param::free_seed(1.8))}),
         CovExpr::ss(Param::free_seed(4.0), Param::free_seed(0.9)),
         CovExpr::wn(Param::free_seed(0.8))});
    for (WeightingMode mode :
         {WeightingMode::FullDiagonal, WeightingMode::NoiseOnly}) {
      for (ObjectiveForm form :
           {ObjectiveForm::Full, ObjectiveForm::Simplified}) {
        Eigen::VectorXd grad;
        weighted_log_marginal_grad(e, X, y, w, mode, form, grad);
        const std::vector<double> theta = e.free_values();
        const double step = 1e-5;
        for (size_t j = 0; j < theta.size(); ++j) {
          std::vector<double> up = theta, dn = theta;
          up[j] *= std::exp(step);
          dn[j] *= std::exp(-step);
          CovExpr eu = e, ed = e;
          eu.set_free_values(up);
          ed.set_free_values(dn);
          const double fd = (weighted_log_marginal(eu, X, y, w, mode, form) -
                             weighted_log_marginal(ed, X, y, w, mode, form)) /
                            (2.0 * step);
          const double denom = std::max(std::abs(fd), 1e-8);
          CHECK(std::abs(grad[static_cast<int>(j)] - fd) / denom < 1e-4);
        }
      }
    }
  }
}

TEST_CASE("white-noise-only fit recovers the weighted second moment") {
  std::mt19937_64 rng(33);
  std::normal_distribution<double> g(0.0, 2.0);
  const int n = 500;
  Eigen::VectorXd X(n), y(n), w(n);
  std::uniform_real_distribution<double> uw(0.5, 1.5);
  for (int i = 0; i < n; ++i) {
    X[i] = i;
    y[i] = g(rng);
    w[i] = uw(rng);
  }
  w *= n / w.sum();
  const CovExpr e = CovExpr::wn(Param::free_seed(1.0));
  FitOptions opts;
  opts.mode = WeightingMode::NoiseOnly;
  const FitResult r = fit(e, X, y, w, {Eigen::VectorXd::Ones(1)}, opts);
  // Closed-form maximizer: eps = sum(w y^2) / n.
  const double expect = (w.array() * y.array().square()).sum() / n;
  CHECK(r.expr.free_values()[0] == doctest::Approx(expect).epsilon(1e-4));
  // Sanity: that is near the true variance 4.
  CHECK(expect == doctest::Approx(4.0).epsilon(0.2));
}

TEST_CASE("raising a point's weight pulls the noise fit toward it") {
  Eigen::VectorXd X = linspace(0.0, 9.0, 10);
  Eigen::VectorXd y = Eigen::VectorXd::Ones(10);
  y[0] = 10.0;  // one outlier
  const CovExpr e = CovExpr::wn(Param::free_seed(1.0));
  FitOptions opts;
  opts.mode = WeightingMode::NoiseOnly;
  auto fitted_eps = [&](double w0) {
    Eigen::VectorXd w = Eigen::VectorXd::Ones(10);
    w[0] = w0;
    return fit(e, X, y, w, {Eigen::VectorXd::Ones(1)}, opts)
        .expr.free_values()[0];
  };
  const double lo = fitted_eps(0.2);
  const double mid = fitted_eps(1.0);
  const double hi = fitted_eps(3.0);
  CHECK(lo < mid);
  CHECK(mid < hi);
}

TEST_CASE("fit validates seeds") {
  Eigen::VectorXd X = linspace(0.0, 5.0, 6);
  Eigen::VectorXd y = Eigen::VectorXd::Ones(6);
  Eigen::VectorXd w = Eigen::VectorXd::Ones(6);
  const CovExpr e = CovExpr::wn(Param::free_seed(1.0));
  CHECK_THROWS_AS(fit(e, X, y, w, {}), std::invalid_argument);
  Eigen::VectorXd bad_dim(2);
  bad_dim << 1.0, 1.0;
  CHECK_THROWS_AS(fit(e, X, y, w, {bad_dim}), std::invalid_argument);
  Eigen::VectorXd bad_sign(1);
  bad_sign << -1.0;
  CHECK_THROWS_AS(fit(e, X, y, w, {bad_sign}), std::invalid_argument);
  const CovExpr fixed = CovExpr::wn(Param::fixed(1.0));
  Eigen::VectorXd s(0);
  CHECK_THROWS_AS(fit(fixed, X, y, w, {s}), std::invalid_argument);
}

TEST_CASE("fit is deterministic and picks the best restart") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 1.0);
  const int n = 40;
  Eigen::VectorXd X(n), y(n);
  for (int i = 0; i < n; ++i) {
    X[i] = i * 0.5;
    y[i] = 3.0 * std::sin(X[i]) + 0.3 * g(rng);
  }
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
  const CovExpr e = smooth_plus_noise(1.0, 1.0, 1.0);
  FitOptions opts;
  opts.mode = WeightingMode::NoiseOnly;
  std::vector<Eigen::VectorXd> seeds;
  for (double s : {0.01, 1.0, 100.0}) {
    seeds.push_back(Eigen::VectorXd::Constant(3, s));
  }
  const FitResult a = fit(e, X, y, w, seeds, opts);
  const FitResult b = fit(e, X, y, w, seeds, opts);
  CHECK(a.log_marginal == b.log_marginal);
  CHECK(a.seed_index == b.seed_index);
  for (size_t s = 0; s < seeds.size(); ++s) {
    const FitResult single = fit(e, X, y, w, {seeds[s]}, opts);
    CHECK(single.log_marginal <= a.log_marginal + 1e-9);
  }
}

TEST_CASE("predict interpolates at training points and decays to the prior") {
  const int n = 15;
  Eigen::VectorXd X = linspace(0.0, 7.0, n);
  Eigen::VectorXd y = (2.0 * X.array().sin()).matrix();
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
  CovExpr e = CovExpr::sum(
      {CovExpr::prod({CovExpr::cn(Param::fixed(4.0)),
                      CovExpr::rbf(Param::fixed(1.0))}),
       CovExpr::wn(Param::fixed(1e-6))});
  FitResult fitted;
  fitted.expr = e;
  Eigen::VectorXd X_star(3), mean, var;
  X_star << X[3], 3.25, 1000.0;
  predict(fitted, X, y, w, WeightingMode::NoiseOnly, X_star, mean, var);
  CHECK(mean[0] == doctest::Approx(y[3]).epsilon(1e-3));
  CHECK(var[0] < 1e-3);
  CHECK(var[1] > 0.0);
  // Far from the data the posterior reverts to the prior.
  CHECK(mean[2] == doctest::Approx(0.0).epsilon(1e-8));
  CHECK(var[2] == doctest::Approx(4.0 + 1e-6).epsilon(1e-8));
}
