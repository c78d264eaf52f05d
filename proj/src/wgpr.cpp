#include "lmft/wgpr.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace lmft {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

}  // namespace

std::vector<int> WeightVector::retained_indices() const {
  std::vector<int> idx;
  idx.reserve(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (w[i] > kDropThreshold) idx.push_back(static_cast<int>(i));
  }
  return idx;
}

Eigen::VectorXd WeightVector::retained_normalized() const {
  const std::vector<int> idx = retained_indices();
  if (idx.empty()) {
    throw std::invalid_argument("WeightVector: no retained entries");
  }
  Eigen::VectorXd r(idx.size());
  for (size_t i = 0; i < idx.size(); ++i) r[i] = w[idx[i]];
  if (!normalized) r *= static_cast<double>(r.size()) / r.sum();
  return r;
}

WeightVector normalize_mean1(const Eigen::VectorXd& raw) {
  if ((raw.array() < 0.0).any()) {
    throw std::invalid_argument("weights must be nonnegative");
  }
  WeightVector out;
  out.w = raw;
  double sum = 0.0;
  int count = 0;
  for (Eigen::Index i = 0; i < raw.size(); ++i) {
    if (raw[i] > WeightVector::kDropThreshold) {
      sum += raw[i];
      ++count;
    } else {
      out.w[i] = 0.0;
    }
  }
  if (count == 0) {
    throw std::invalid_argument("normalize_mean1: all weights dropped");
  }
  out.w *= count / sum;
  out.normalized = true;
  return out;
}

namespace {

// Cholesky with the jitter ladder: 1e-10 * mean(diag), escalating 10x up to
// 1e-4 * mean(diag). Throws past the ladder.
Eigen::LLT<Eigen::MatrixXd> factor_with_jitter(const Eigen::MatrixXd& Sigma) {
  const Eigen::Index n = Sigma.rows();
  const double mean_diag = Sigma.diagonal().mean();
  Eigen::LLT<Eigen::MatrixXd> llt(Sigma);
  double jitter = 1e-10 * mean_diag;
  const double max_jitter = 1e-4 * mean_diag;
  while (llt.info() != Eigen::Success) {
    if (!(jitter <= max_jitter)) {
      throw std::runtime_error(
          "covariance not positive definite after max jitter");
    }
    llt.compute(Sigma + jitter * Eigen::MatrixXd::Identity(n, n));
    jitter *= 10.0;
  }
  return llt;
}

double log_det_from_llt(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

}  // namespace

double log_gauss_pdf(const Eigen::VectorXd& y, const Eigen::MatrixXd& Sigma) {
  if (y.size() != Sigma.rows() || Sigma.rows() != Sigma.cols()) {
    throw std::invalid_argument("log_gauss_pdf: shape mismatch");
  }
  const Eigen::LLT<Eigen::MatrixXd> llt = factor_with_jitter(Sigma);
  const Eigen::VectorXd alpha = llt.solve(y);
  return -0.5 * y.dot(alpha) - 0.5 * log_det_from_llt(llt) -
         0.5 * y.size() * kLog2Pi;
}

namespace {

void check_weights(const Eigen::VectorXd& X, const Eigen::VectorXd& w) {
  if (w.size() != X.size()) {
    throw std::invalid_argument("weight/data length mismatch");
  }
  if ((w.array() <= 0.0).any()) {
    throw std::invalid_argument("retained weights must be strictly positive");
  }
}

double diag_source(const CovExpr& expr, WeightingMode mode) {
  return mode == WeightingMode::FullDiagonal ? cov_diag_value(expr, true)
                                             : cov_diag_value(expr, true) -
                                                   cov_diag_value(expr, false);
}

Eigen::MatrixXd weighted_cov_ctx(const CovExpr& expr, const CovContext& ctx,
                                 const Eigen::VectorXd& w, WeightingMode mode) {
  Eigen::MatrixXd K = cov_matrix(expr, ctx);
  const double d = diag_source(expr, mode);
  K.diagonal() -= ((w.array() - 1.0) / w.array() * d).matrix();
  return K;
}

double wlm_ctx(const CovExpr& expr, const CovContext& ctx,
               const Eigen::VectorXd& y, const Eigen::VectorXd& w,
               WeightingMode mode, ObjectiveForm form) {
  double value = log_gauss_pdf(y, weighted_cov_ctx(expr, ctx, w, mode));
  if (form == ObjectiveForm::Full) {
    value -= (w.array() - 1.0).sum() / 2.0 * std::log(diag_source(expr, mode));
  }
  return value;
}

double wlm_grad_ctx(const CovExpr& expr, const CovContext& ctx,
                    const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                    WeightingMode mode, ObjectiveForm form,
                    Eigen::VectorXd& grad) {
  const Eigen::Index n = y.size();
  const Eigen::MatrixXd sigma = weighted_cov_ctx(expr, ctx, w, mode);
  const Eigen::LLT<Eigen::MatrixXd> llt = factor_with_jitter(sigma);
  const Eigen::VectorXd alpha = llt.solve(y);
  const Eigen::MatrixXd sigma_inv = llt.solve(Eigen::MatrixXd::Identity(n, n));
  double value = -0.5 * y.dot(alpha) - 0.5 * log_det_from_llt(llt) -
                 0.5 * n * kLog2Pi;

  const std::vector<Eigen::MatrixXd> kgrads = cov_grad(expr, ctx);
  const std::vector<double> dg_full = cov_diag_grad(expr, true);
  const std::vector<double> dg_nown = cov_diag_grad(expr, false);
  const double d = diag_source(expr, mode);
  const Eigen::ArrayXd wfrac = (w.array() - 1.0) / w.array();

  grad.resize(static_cast<Eigen::Index>(kgrads.size()));
  for (size_t j = 0; j < kgrads.size(); ++j) {
    const double dd = mode == WeightingMode::FullDiagonal
                          ? dg_full[j]
                          : dg_full[j] - dg_nown[j];
    Eigen::MatrixXd dsigma = kgrads[j];
    dsigma.diagonal() -= (wfrac * dd).matrix();
    grad[static_cast<Eigen::Index>(j)] =
        0.5 * alpha.dot(dsigma * alpha) -
        0.5 * sigma_inv.cwiseProduct(dsigma).sum();
    if (form == ObjectiveForm::Full) {
      grad[static_cast<Eigen::Index>(j)] -=
          (w.array() - 1.0).sum() / 2.0 * dd / d;
    }
  }
  if (form == ObjectiveForm::Full) {
    value -= (w.array() - 1.0).sum() / 2.0 * std::log(d);
  }
  return value;
}

}  // namespace

Eigen::MatrixXd weighted_cov(const CovExpr& expr, const Eigen::VectorXd& X,
                             const Eigen::VectorXd& w, WeightingMode mode) {
  check_weights(X, w);
  expr.validate();
  return weighted_cov_ctx(expr, CovContext::from_points(X), w, mode);
}

double weighted_log_marginal(const CovExpr& expr, const Eigen::VectorXd& X,
                             const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                             WeightingMode mode, ObjectiveForm form) {
  check_weights(X, w);
  expr.validate();
  return wlm_ctx(expr, CovContext::from_points(X), y, w, mode, form);
}

double weighted_log_marginal_grad(const CovExpr& expr, const Eigen::VectorXd& X,
                                  const Eigen::VectorXd& y,
                                  const Eigen::VectorXd& w, WeightingMode mode,
                                  ObjectiveForm form, Eigen::VectorXd& grad) {
  check_weights(X, w);
  expr.validate();
  return wlm_grad_ctx(expr, CovContext::from_points(X), y, w, mode, form, grad);
}

namespace {

// Bounds on log theta keep line-search probes out of overflow territory.
constexpr double kLogBound = 46.0;  // exp(46) ~ 1e20

struct Objective {
  const CovExpr& expr;
  const CovContext& ctx;
  const Eigen::VectorXd& y;
  const Eigen::VectorXd& w;
  WeightingMode mode;
  ObjectiveForm form;

  CovExpr with_params(const Eigen::VectorXd& z) const {
    const Eigen::ArrayXd theta = z.array().exp();
    CovExpr e = expr;
    e.set_free_values(
        std::vector<double>(theta.data(), theta.data() + theta.size()));
    return e;
  }

  // Negated weighted log marginal over z = log theta; +inf on failure.
  double value(const Eigen::VectorXd& z) const {
    try {
      return -wlm_ctx(with_params(z), ctx, y, w, mode, form);
    } catch (const std::runtime_error&) {
      return std::numeric_limits<double>::infinity();
    }
  }

  double value_grad(const Eigen::VectorXd& z, Eigen::VectorXd& g) const {
    try {
      const double v = wlm_grad_ctx(with_params(z), ctx, y, w, mode, form, g);
      g = -g;
      return -v;
    } catch (const std::runtime_error&) {
      g.setZero(z.size());
      return std::numeric_limits<double>::infinity();
    }
  }
};

struct BfgsOutcome {
  Eigen::VectorXd z;
  double f = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
  bool usable = false;  // at least one finite evaluation
};

BfgsOutcome bfgs_minimize(const Objective& obj, Eigen::VectorXd z,
                          int max_iterations, double grad_tol) {
  const Eigen::Index dim = z.size();
  BfgsOutcome out;
  Eigen::VectorXd g(dim);
  double f = obj.value_grad(z, g);
  if (!std::isfinite(f)) return out;
  out.usable = true;

  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(dim, dim);
  int stagnant = 0;
  for (int iter = 0; iter < max_iterations; ++iter) {
    out.iterations = iter;
    if (g.norm() < grad_tol) {
      out.converged = true;
      break;
    }
    Eigen::VectorXd p = -(H * g);
    if (p.dot(g) >= 0.0) {
      H.setIdentity();
      p = -g;
    }
    // Backtracking Armijo line search.
    double step = 1.0;
    const double slope = g.dot(p);
    double f_new = std::numeric_limits<double>::infinity();
    Eigen::VectorXd z_new;
    bool accepted = false;
    for (int ls = 0; ls < 25; ++ls) {
      z_new = (z + step * p).cwiseMax(-kLogBound).cwiseMin(kLogBound);
      f_new = obj.value(z_new);
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // A stale curvature estimate can make the step hopelessly scaled
      // (near-flat regions produce noise-level y vectors); fall back to
      // steepest descent once before giving up.
      if (H.isApprox(Eigen::MatrixXd::Identity(dim, dim))) break;
      H.setIdentity();
      continue;
    }

    Eigen::VectorXd g_new(dim);
    f_new = obj.value_grad(z_new, g_new);
    if (!std::isfinite(f_new)) break;

    const Eigen::VectorXd s = z_new - z;
    const Eigen::VectorXd yv = g_new - g;
    const double sy = s.dot(yv);
    // Skip the update when the gradient change is indistinguishable from
    // numerical noise; folding it in produces wildly mis-scaled curvature.
    if (sy > 1e-12 && yv.norm() > 1e-9 * (1.0 + g.norm())) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(dim, dim);
      H = (I - rho * s * yv.transpose()) * H *
              (I - rho * yv * s.transpose()) +
          rho * s * s.transpose();
    }
    // Two consecutive iterations without meaningful progress end the run;
    // rugged likelihood surfaces otherwise burn the full iteration budget
    // crawling between near-identical points.
    stagnant = std::abs(f - f_new) < 1e-10 * (1.0 + std::abs(f)) ? stagnant + 1
                                                                 : 0;
    z = z_new;
    f = f_new;
    g = g_new;
    if (stagnant >= 3) {
      out.converged = g.norm() < grad_tol;
      break;
    }
  }
  if (g.norm() < grad_tol) out.converged = true;
  out.z = z;
  out.f = f;
  return out;
}

}  // namespace

FitResult fit(const CovExpr& expr, const Eigen::VectorXd& X,
              const Eigen::VectorXd& y, const Eigen::VectorXd& w,
              const std::vector<Eigen::VectorXd>& seeds,
              const FitOptions& opts) {
  expr.validate();
  check_weights(X, w);
  const int n_free = expr.free_count();
  if (n_free == 0) {
    throw std::invalid_argument("fit: expression has no free parameters");
  }
  if (seeds.empty()) {
    throw std::invalid_argument("fit: at least one seed required");
  }

  const CovContext ctx = CovContext::from_points(X);
  const Objective obj{expr, ctx, y, w, opts.mode, opts.form};
  BfgsOutcome best;
  int best_seed = -1;
  for (size_t s = 0; s < seeds.size(); ++s) {
    if (seeds[s].size() != n_free) {
      throw std::invalid_argument("fit: seed dimension mismatch");
    }
    if ((seeds[s].array() <= 0.0).any()) {
      throw std::invalid_argument("fit: seeds must be positive");
    }
    Eigen::VectorXd z =
        seeds[s].array().log().cwiseMax(-kLogBound).cwiseMin(kLogBound);
    BfgsOutcome run = bfgs_minimize(obj, z, opts.max_iterations, opts.grad_tol);
    if (!run.usable) continue;
    if (best_seed < 0 || run.f < best.f) {
      best = std::move(run);
      best_seed = static_cast<int>(s);
    }
  }
  if (best_seed < 0) {
    throw std::runtime_error(
        "fit: every restart failed covariance factorization");
  }

  FitResult result;
  result.expr = expr;
  const Eigen::ArrayXd theta = best.z.array().exp();
  result.expr.set_free_values(
      std::vector<double>(theta.data(), theta.data() + theta.size()));
  result.log_marginal = -best.f;
  result.converged = best.converged;
  result.iterations = best.iterations;
  result.seed_origin = opts.seed_origin;
  result.seed_index = best_seed;
  result.objective_form = opts.form;
  return result;
}

void predict(const FitResult& fitted, const Eigen::VectorXd& X_train,
             const Eigen::VectorXd& y, const Eigen::VectorXd& w,
             WeightingMode mode, const Eigen::VectorXd& X_star,
             Eigen::VectorXd& mean, Eigen::VectorXd& variance) {
  const Eigen::MatrixXd sigma = weighted_cov(fitted.expr, X_train, w, mode);
  const Eigen::LLT<Eigen::MatrixXd> llt = factor_with_jitter(sigma);
  const Eigen::VectorXd alpha = llt.solve(y);
  const double prior_var = cov_diag_value(fitted.expr, true);
  const double wn_level = cov_diag_value(fitted.expr, true) -
                          cov_diag_value(fitted.expr, false);

  mean.resize(X_star.size());
  variance.resize(X_star.size());
  for (Eigen::Index s = 0; s < X_star.size(); ++s) {
    Eigen::VectorXd k_star(X_train.size());
    for (Eigen::Index i = 0; i < X_train.size(); ++i) {
      // Cross-covariances never pick up WN: distinct observation indices.
      k_star[i] = cov_eval(fitted.expr, X_train[i], X_star[s]) -
                  (X_train[i] == X_star[s] ? wn_level : 0.0);
    }
    mean[s] = k_star.dot(alpha);
    variance[s] = prior_var - k_star.dot(llt.solve(k_star));
  }
}

}  // namespace lmft
