#pragma once

#include <Eigen/Core>

namespace lmft {

/// Locality-weighting kernel families mapping (data point, query point)
/// pairs to nonnegative weights.
enum class KernelFamily {
  Tricube,
  Uniform,
  Gaussian,
  Dirichlet,
  KnnTricube,
  KnnUniform,
};

struct KernelSpec {
  KernelFamily family = KernelFamily::Tricube;
  double h = 1.0;       // bandwidth, fixed-bandwidth families
  int k = 1;            // neighbor count, knn families
  int dirichlet_n = 1;  // order of the Dirichlet kernel

  bool has_fixed_bandwidth() const;
  // Throws std::invalid_argument on nonpositive h / k < 1 / dirichlet_n < 1.
  void validate() const;
};

bool is_knn(KernelFamily family);

const char* kernel_family_name(KernelFamily family);
KernelFamily kernel_family_from_name(const std::string& name);

// Weight profile as a function of distance, at an explicit bandwidth.
// The Dirichlet kernel takes its literal form sin((n+1/2)d^2)/sin(d^2/2);
// it can be negative or singular away from d = 0 and is excluded from
// LMFT pipelines. At d = 0 the limiting value 2n+1 is returned.
double kernel_profile(const KernelSpec& spec, double distance, double bandwidth);

// Fixed-bandwidth evaluation. knn families need the dataset and must go
// through kernel_weights; calling eval_kernel with one throws.
double eval_kernel(const KernelSpec& spec, double x, double q);
double eval_kernel(const KernelSpec& spec, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& q);

// Raw (unnormalized) weight of every element of X against the query q.
// For knn families the effective bandwidth is the distance from q to its
// k-th nearest element of X; ties at the k-th distance share that
// bandwidth, so all tied points get the boundary weight.
Eigen::VectorXd kernel_weights(const KernelSpec& spec, const Eigen::VectorXd& X,
                               double q);

}  // namespace lmft
