#pragma once

#include <Eigen/Core>
#include <vector>

#include "lmft/covfn.hpp"

namespace lmft {

/// Per-observation nonnegative weights under the mean-1 convention.
/// Entries below the drop threshold are considered dropped; normalization
/// is over the retained entries only.
struct WeightVector {
  Eigen::VectorXd w;
  bool normalized = false;

  static constexpr double kDropThreshold = 1e-12;

  std::vector<int> retained_indices() const;
  // Retained weights rescaled to mean 1; throws if nothing is retained.
  Eigen::VectorXd retained_normalized() const;
};

WeightVector normalize_mean1(const Eigen::VectorXd& raw);

enum class WeightingMode { FullDiagonal, NoiseOnly };
enum class ObjectiveForm { Full, Simplified };
enum class SeedOrigin { Fixed, Neighbor, MultiSeed };

struct FitResult {
  CovExpr expr;  // free parameters replaced by fitted values
  double log_marginal = 0.0;
  bool converged = false;
  int iterations = 0;
  SeedOrigin seed_origin = SeedOrigin::Fixed;
  int seed_index = 0;
  ObjectiveForm objective_form = ObjectiveForm::Simplified;
};

// log N(y | 0, Sigma) via Cholesky. On factorization failure, jitter
// 1e-10*mean(diag) is added to the diagonal and escalated by 10x up to
// 1e-4*mean(diag); past that a std::runtime_error is thrown.
double log_gauss_pdf(const Eigen::VectorXd& y, const Eigen::MatrixXd& Sigma);

// Weighted covariance: K with its diagonal reduced by (w_i-1)/w_i * d_i,
// where d_i is the full diagonal K(x_i,x_i) (FullDiagonal) or the summed
// white-noise level (NoiseOnly). Weights must be strictly positive;
// dropped points are removed before this call.
Eigen::MatrixXd weighted_cov(const CovExpr& expr, const Eigen::VectorXd& X,
                             const Eigen::VectorXd& w, WeightingMode mode);

// Weighted log marginal likelihood. The Full form subtracts the correction
// sum_i (w_i-1)/2 * log d_i so that its maximizer matches the replicated
// system; the Simplified form is the plain log pdf under the weighted
// covariance and shares the same maximizer for mean-1 weights.
double weighted_log_marginal(const CovExpr& expr, const Eigen::VectorXd& X,
                             const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                             WeightingMode mode, ObjectiveForm form);

// Value plus analytic gradient with respect to log theta (free parameters
// in tree order).
double weighted_log_marginal_grad(const CovExpr& expr, const Eigen::VectorXd& X,
                                  const Eigen::VectorXd& y,
                                  const Eigen::VectorXd& w, WeightingMode mode,
                                  ObjectiveForm form, Eigen::VectorXd& grad);

struct FitOptions {
  WeightingMode mode = WeightingMode::FullDiagonal;
  ObjectiveForm form = ObjectiveForm::Simplified;
  int max_iterations = 200;
  double grad_tol = 1e-6;
  SeedOrigin seed_origin = SeedOrigin::Fixed;
};

// Quasi-Newton (BFGS) ascent on the weighted log marginal over log theta,
// restarted from every seed (natural units); best-scoring restart wins.
// Deterministic given seeds and data. Throws if every restart fails.
FitResult fit(const CovExpr& expr, const Eigen::VectorXd& X,
              const Eigen::VectorXd& y, const Eigen::VectorXd& w,
              const std::vector<Eigen::VectorXd>& seeds,
              const FitOptions& opts = {});

// Zero-mean GP posterior at X_star, with the weighted covariance on the
// training block.
void predict(const FitResult& fitted, const Eigen::VectorXd& X_train,
             const Eigen::VectorXd& y, const Eigen::VectorXd& w,
             WeightingMode mode, const Eigen::VectorXd& X_star,
             Eigen::VectorXd& mean, Eigen::VectorXd& variance);

}  // namespace lmft
