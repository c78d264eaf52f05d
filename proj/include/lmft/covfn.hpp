#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include <json.hpp>

namespace lmft {

/// A positive scalar parameter of a covariance function, either free
/// (optimized, the stored value acting as the seed) or fixed.
struct Param {
  double value = 1.0;
  bool is_free = false;

  static Param fixed(double v) { return Param{v, false}; }
  static Param free_seed(double v) { return Param{v, true}; }
};

/// Covariance-function expression tree: sums and products of constant (CN),
/// radial-basis (RBF), white-noise (WN) and exponential-sine-squared (SS)
/// components. Parameters are strictly positive; optimization happens in
/// log-space elsewhere.
struct CovExpr {
  enum class Kind { Sum, Prod, CN, RBF, WN, SS };

  Kind kind = Kind::CN;
  std::vector<CovExpr> children;  // Sum/Prod only, >= 2 entries
  Param a;                        // CN: c, RBF: l, WN: eps, SS: p
  Param b;                        // SS: l

  static CovExpr cn(Param c);
  static CovExpr rbf(Param l);
  static CovExpr wn(Param eps);
  static CovExpr ss(Param p, Param l);
  static CovExpr sum(std::vector<CovExpr> terms);
  static CovExpr prod(std::vector<CovExpr> factors);

  // Throws std::invalid_argument on nonpositive parameters or degenerate
  // Sum/Prod arity.
  void validate() const;

  int free_count() const;
  // Free parameters in deterministic postorder (left-to-right, leaves first).
  std::vector<double> free_values() const;
  std::vector<std::string> free_names() const;
  void set_free_values(const std::vector<double>& values);

  bool has_wn() const;
};

// WN keys on exact coincidence of the arguments; cov_matrix keys on index
// identity instead (i == j), which is the replication semantics used by the
// weighting scheme.
double cov_eval(const CovExpr& expr, double x, double x_p);

Eigen::MatrixXd cov_matrix(const CovExpr& expr, const Eigen::VectorXd& X);

// One matrix per free parameter, dK/d(log theta_j), parameter order matching
// free_values(). Throws if the expression has no free parameter.
std::vector<Eigen::MatrixXd> cov_grad(const CovExpr& expr,
                                      const Eigen::VectorXd& X);

/// Pairwise distances and the index-identity mask for a fixed point set,
/// precomputed once so repeated evaluations (optimizer line searches) skip
/// the quadratic setup.
struct CovContext {
  Eigen::MatrixXd D;
  Eigen::MatrixXd Id;

  static CovContext from_points(const Eigen::VectorXd& X);
};

Eigen::MatrixXd cov_matrix(const CovExpr& expr, const CovContext& ctx);
std::vector<Eigen::MatrixXd> cov_grad(const CovExpr& expr,
                                      const CovContext& ctx);

// Value of any diagonal entry (all components are stationary). With
// include_wn = false, WN leaves are treated as zero.
double cov_diag_value(const CovExpr& expr, bool include_wn = true);

// d(diag value)/d(log theta_j) per free parameter.
std::vector<double> cov_diag_grad(const CovExpr& expr, bool include_wn = true);

// Summed white-noise contribution to each diagonal entry.
Eigen::VectorXd noise_diagonal(const CovExpr& expr, const Eigen::VectorXd& X);

nlohmann::json covexpr_to_json(const CovExpr& expr);
CovExpr covexpr_from_json(const nlohmann::json& j);

}  // namespace lmft
