#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

namespace lmft {

/// Brute-force construction used to verify the observation-weighting
/// identities: n base variables with covariance B0, plus w independent
/// copies of a new variable with variance u*w, each copy sharing the
/// covariance vector b against the base block.
struct ReplicatedGaussian {
  Eigen::MatrixXd B0;  // n x n, symmetric
  Eigen::VectorXd b;   // n
  double u = 1.0;
  int w = 1;
};

// Assembled (n+w) x (n+w) covariance with B0 top-left, b repeated against
// the copies and u*w*I in the copies' block.
Eigen::MatrixXd build_replicated(const ReplicatedGaussian& rg);

// det(B_w) / (u w)^w == det(B_1) / u, within relative tolerance.
bool check_lemma_determinant(const ReplicatedGaussian& rg,
                             double* error = nullptr, double tol = 1e-9);

// B_w^{-1} assembled from the blocks of B_1^{-1} reproduces the identity
// when multiplied against B_w, within max-abs tolerance.
bool check_lemma_inverse(const ReplicatedGaussian& rg, double* error = nullptr,
                         double tol = 1e-9);

// y_w^T B_w^{-1} y_w == y_1^T B_1^{-1} y_1 where y_w appends w copies of x.
bool check_lemma_quadform(const ReplicatedGaussian& rg,
                          const Eigen::VectorXd& y, double x,
                          double* error = nullptr, double tol = 1e-9);

// log G(y_w|B_w) - log G(y_1|B_1) ==
//   -[(w-1)/2 log u + w/2 log w + (w-1)/2 log 2pi].
bool check_theorem(const ReplicatedGaussian& rg, const Eigen::VectorXd& y,
                   double x, double* error = nullptr, double tol = 1e-9);

/// One variable of the recursive multi-weight assembly: covariances b
/// against the previously added variables, copy variance u, weight w.
struct CorollarySpec {
  Eigen::VectorXd b;  // length = index of this variable
  double u = 1.0;
  int w = 1;
};

// Builds the fully replicated covariance (variable i appearing w_i times at
// variance u_i) and the collapsed weighted matrix C = diag(u_i / w_i) with
// the same off-diagonal structure, then verifies
//   log G(y_w|Sigma_n) == log G(y|C)
//     - sum_i [(w_i-1)/2 log(u_i/w_i) + w_i/2 log w_i + (w_i-1)/2 log 2pi].
bool check_corollary(const std::vector<CorollarySpec>& specs,
                     const Eigen::VectorXd& y, double* error = nullptr,
                     double tol = 1e-8);

struct OracleReport {
  int instances = 0;
  int failures = 0;
  double max_abs_error = 0.0;
};

// Randomized verification of all identities above. `instances` counts per
// check family (determinant, inverse, quadform, theorem); corollary
// instances run at instances / 5 with mixed weights in {1,2,3}.
OracleReport run_oracle_suite(std::uint64_t rng_seed, int instances);

}  // namespace lmft
