#include "lmft/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace lmft {

bool is_knn(KernelFamily family) {
  return family == KernelFamily::KnnTricube || family == KernelFamily::KnnUniform;
}

bool KernelSpec::has_fixed_bandwidth() const { return !is_knn(family); }

void KernelSpec::validate() const {
  if (has_fixed_bandwidth() && family != KernelFamily::Dirichlet) {
    if (!(h > 0.0) || !std::isfinite(h)) {
      throw std::invalid_argument("kernel bandwidth h must be positive");
    }
  }
  if (is_knn(family) && k < 1) {
    throw std::invalid_argument("knn kernel requires k >= 1");
  }
  if (family == KernelFamily::Dirichlet && dirichlet_n < 1) {
    throw std::invalid_argument("dirichlet kernel requires n >= 1");
  }
}

const char* kernel_family_name(KernelFamily family) {
  switch (family) {
    case KernelFamily::Tricube: return "tricube";
    case KernelFamily::Uniform: return "uniform";
    case KernelFamily::Gaussian: return "gaussian";
    case KernelFamily::Dirichlet: return "dirichlet";
    case KernelFamily::KnnTricube: return "knn_tricube";
    case KernelFamily::KnnUniform: return "knn_uniform";
  }
  return "?";
}

KernelFamily kernel_family_from_name(const std::string& name) {
  if (name == "tricube") return KernelFamily::Tricube;
  if (name == "uniform") return KernelFamily::Uniform;
  if (name == "gaussian") return KernelFamily::Gaussian;
  if (name == "dirichlet") return KernelFamily::Dirichlet;
  if (name == "knn_tricube") return KernelFamily::KnnTricube;
  if (name == "knn_uniform") return KernelFamily::KnnUniform;
  throw std::invalid_argument("unknown kernel family: " + name);
}

namespace {

double tricube_profile(double d, double h) {
  if (d >= h) return 0.0;
  const double r = d / h;
  const double t = 1.0 - r * r * r;
  return t * t * t;
}

// Boundary convention: fixed-bandwidth uniform is the open indicator d < h;
// the knn variant closes the boundary so the k-th neighbor itself is kept.
double uniform_profile(double d, double h, bool closed) {
  return (closed ? d <= h : d < h) ? 1.0 : 0.0;
}

double dirichlet_profile(double d, int n) {
  const double d2 = d * d;
  const double denom = std::sin(d2 / 2.0);
  if (denom == 0.0 && d2 == 0.0) return 2.0 * n + 1.0;  // limiting value
  return std::sin((n + 0.5) * d2) / denom;
}

}  // namespace

double kernel_profile(const KernelSpec& spec, double distance, double bandwidth) {
  switch (spec.family) {
    case KernelFamily::Tricube:
      return tricube_profile(distance, bandwidth);
    case KernelFamily::Uniform:
      return uniform_profile(distance, bandwidth, /*closed=*/false);
    case KernelFamily::Gaussian:
      return std::exp(-distance * distance / bandwidth);
    case KernelFamily::Dirichlet:
      return dirichlet_profile(distance, spec.dirichlet_n);
    case KernelFamily::KnnTricube:
      if (bandwidth == 0.0) return distance == 0.0 ? 1.0 : 0.0;
      return tricube_profile(distance, bandwidth);
    case KernelFamily::KnnUniform:
      if (bandwidth == 0.0) return distance == 0.0 ? 1.0 : 0.0;
      return uniform_profile(distance, bandwidth, /*closed=*/true);
  }
  return 0.0;
}

double eval_kernel(const KernelSpec& spec, double x, double q) {
  spec.validate();
  if (is_knn(spec.family)) {
    throw std::invalid_argument(
        "knn kernels require the dataset; use kernel_weights");
  }
  return kernel_profile(spec, std::abs(x - q), spec.h);
}

double eval_kernel(const KernelSpec& spec, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& q) {
  spec.validate();
  if (is_knn(spec.family)) {
    throw std::invalid_argument(
        "knn kernels require the dataset; use kernel_weights");
  }
  if (x.size() != q.size()) {
    throw std::invalid_argument("eval_kernel: dimension mismatch");
  }
  return kernel_profile(spec, (x - q).norm(), spec.h);
}

Eigen::VectorXd kernel_weights(const KernelSpec& spec, const Eigen::VectorXd& X,
                               double q) {
  spec.validate();
  if (X.size() == 0) {
    throw std::invalid_argument("kernel_weights: empty dataset");
  }
  Eigen::VectorXd dist = (X.array() - q).abs();
  double bandwidth = spec.h;
  if (is_knn(spec.family)) {
    if (spec.k > X.size()) {
      throw std::invalid_argument("kernel_weights: k exceeds dataset size");
    }
    std::vector<double> d(dist.data(), dist.data() + dist.size());
    std::nth_element(d.begin(), d.begin() + (spec.k - 1), d.end());
    bandwidth = d[spec.k - 1];
  }
  Eigen::VectorXd w(X.size());
  for (Eigen::Index i = 0; i < X.size(); ++i) {
    w[i] = kernel_profile(spec, dist[i], bandwidth);
  }
  return w;
}

}  // namespace lmft
