#include "lmft/replication.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "lmft/wgpr.hpp"

namespace lmft {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

void validate(const ReplicatedGaussian& rg) {
  if (rg.B0.rows() != rg.B0.cols() || rg.B0.rows() != rg.b.size()) {
    throw std::invalid_argument("ReplicatedGaussian: shape mismatch");
  }
  if (!(rg.u > 0.0) || rg.w < 1) {
    throw std::invalid_argument("ReplicatedGaussian: need u > 0, w >= 1");
  }
}

Eigen::MatrixXd base_matrix(const ReplicatedGaussian& rg) {
  ReplicatedGaussian one = rg;
  one.w = 1;
  return build_replicated(one);
}

}  // namespace

Eigen::MatrixXd build_replicated(const ReplicatedGaussian& rg) {
  validate(rg);
  const Eigen::Index n = rg.B0.rows();
  const int w = rg.w;
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n + w, n + w);
  B.topLeftCorner(n, n) = rg.B0;
  for (int j = 0; j < w; ++j) {
    B.block(0, n + j, n, 1) = rg.b;
    B.block(n + j, 0, 1, n) = rg.b.transpose();
    B(n + j, n + j) = rg.u * w;
  }
  return B;
}

bool check_lemma_determinant(const ReplicatedGaussian& rg, double* error,
                             double tol) {
  const Eigen::MatrixXd Bw = build_replicated(rg);
  const Eigen::MatrixXd B1 = base_matrix(rg);
  const double lhs = Bw.determinant() / std::pow(rg.u * rg.w, rg.w);
  const double rhs = B1.determinant() / rg.u;
  const double err = std::abs(lhs - rhs) / std::max(std::abs(rhs), 1e-300);
  if (error) *error = err;
  return err < tol;
}

bool check_lemma_inverse(const ReplicatedGaussian& rg, double* error,
                         double tol) {
  const Eigen::Index n = rg.B0.rows();
  const int w = rg.w;
  const Eigen::MatrixXd B1 = base_matrix(rg);
  const Eigen::MatrixXd B1inv = B1.inverse();

  const Eigen::MatrixXd A = B1inv.topLeftCorner(n, n);
  const Eigen::VectorXd c = B1inv.block(0, n, n, 1);
  const double z = B1inv(n, n);

  Eigen::MatrixXd assembled = Eigen::MatrixXd::Zero(n + w, n + w);
  assembled.topLeftCorner(n, n) = A;
  for (int j = 0; j < w; ++j) {
    assembled.block(0, n + j, n, 1) = c / w;
    assembled.block(n + j, 0, 1, n) = c.transpose() / w;
  }
  assembled.bottomRightCorner(w, w) =
      (z * rg.u - 1.0) / (double(w) * w * rg.u) * Eigen::MatrixXd::Ones(w, w) +
      Eigen::MatrixXd::Identity(w, w) / (rg.u * w);

  const Eigen::MatrixXd Bw = build_replicated(rg);
  const double err =
      (Bw * assembled - Eigen::MatrixXd::Identity(n + w, n + w))
          .cwiseAbs()
          .maxCoeff();
  if (error) *error = err;
  return err < tol;
}

namespace {

Eigen::VectorXd append_copies(const Eigen::VectorXd& y, double x, int w) {
  Eigen::VectorXd yw(y.size() + w);
  yw.head(y.size()) = y;
  yw.tail(w).setConstant(x);
  return yw;
}

}  // namespace

bool check_lemma_quadform(const ReplicatedGaussian& rg, const Eigen::VectorXd& y,
                          double x, double* error, double tol) {
  if (y.size() != rg.B0.rows()) {
    throw std::invalid_argument("check_lemma_quadform: y size mismatch");
  }
  const Eigen::MatrixXd Bw = build_replicated(rg);
  const Eigen::MatrixXd B1 = base_matrix(rg);
  const Eigen::VectorXd yw = append_copies(y, x, rg.w);
  const Eigen::VectorXd y1 = append_copies(y, x, 1);
  const double lhs = yw.dot(Bw.ldlt().solve(yw));
  const double rhs = y1.dot(B1.ldlt().solve(y1));
  const double err = std::abs(lhs - rhs) / std::max(std::abs(rhs), 1.0);
  if (error) *error = err;
  return err < tol;
}

bool check_theorem(const ReplicatedGaussian& rg, const Eigen::VectorXd& y,
                   double x, double* error, double tol) {
  const Eigen::MatrixXd Bw = build_replicated(rg);
  const Eigen::MatrixXd B1 = base_matrix(rg);
  const Eigen::VectorXd yw = append_copies(y, x, rg.w);
  const Eigen::VectorXd y1 = append_copies(y, x, 1);
  const double lhs = log_gauss_pdf(yw, Bw) - log_gauss_pdf(y1, B1);
  const double w = rg.w;
  const double rhs =
      -((w - 1.0) / 2.0 * std::log(rg.u) + w / 2.0 * std::log(w) +
        (w - 1.0) / 2.0 * kLog2Pi);
  const double err = std::abs(lhs - rhs);
  if (error) *error = err;
  return err < tol;
}

bool check_corollary(const std::vector<CorollarySpec>& specs,
                     const Eigen::VectorXd& y, double* error, double tol) {
  const int n = static_cast<int>(specs.size());
  if (y.size() != n) {
    throw std::invalid_argument("check_corollary: y size mismatch");
  }
  int total = 0;
  for (int i = 0; i < n; ++i) {
    if (specs[i].b.size() != i || specs[i].w < 1 || !(specs[i].u > 0.0)) {
      throw std::invalid_argument("check_corollary: malformed spec");
    }
    total += specs[i].w;
  }

  // Replicated system: variable i appears w_i times at variance u_i; the
  // covariance of any copy of i with any copy of j (j < i) is b_i[j].
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(total, total);
  Eigen::MatrixXd c_mat = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd yw(total);
  std::vector<int> offset(n);
  int pos = 0;
  for (int i = 0; i < n; ++i) {
    offset[i] = pos;
    for (int a = 0; a < specs[i].w; ++a) {
      sigma(pos + a, pos + a) = specs[i].u;
      yw[pos + a] = y[i];
    }
    for (int j = 0; j < i; ++j) {
      for (int a = 0; a < specs[i].w; ++a) {
        for (int bcopy = 0; bcopy < specs[j].w; ++bcopy) {
          sigma(pos + a, offset[j] + bcopy) = specs[i].b[j];
          sigma(offset[j] + bcopy, pos + a) = specs[i].b[j];
        }
      }
    }
    c_mat(i, i) = specs[i].u / specs[i].w;
    for (int j = 0; j < i; ++j) {
      c_mat(i, j) = specs[i].b[j];
      c_mat(j, i) = specs[i].b[j];
    }
    pos += specs[i].w;
  }

  double correction = 0.0;
  for (int i = 0; i < n; ++i) {
    const double w = specs[i].w;
    correction += (w - 1.0) / 2.0 * std::log(specs[i].u / w) +
                  w / 2.0 * std::log(w) + (w - 1.0) / 2.0 * kLog2Pi;
  }

  const double lhs = log_gauss_pdf(yw, sigma);
  const double rhs = log_gauss_pdf(y, c_mat) - correction;
  const double err = std::abs(lhs - rhs);
  if (error) *error = err;
  return err < tol;
}

namespace {

// Random instance with B_1 positive definite.
ReplicatedGaussian random_instance(std::mt19937_64& rng, int max_n, int max_w) {
  std::uniform_int_distribution<int> n_dist(1, max_n);
  std::uniform_int_distribution<int> w_dist(1, max_w);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::uniform_real_distribution<double> u_dist(0.5, 3.0);
  for (;;) {
    const int n = n_dist(rng);
    Eigen::MatrixXd A(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) A(i, j) = unif(rng);
    }
    ReplicatedGaussian rg;
    rg.B0 = A * A.transpose() + 0.5 * Eigen::MatrixXd::Identity(n, n);
    rg.b = Eigen::VectorXd::NullaryExpr(n, [&]() { return 0.2 * unif(rng); });
    rg.u = u_dist(rng);
    rg.w = w_dist(rng);
    ReplicatedGaussian one = rg;
    one.w = 1;
    Eigen::LLT<Eigen::MatrixXd> llt(build_replicated(one));
    if (llt.info() == Eigen::Success) return rg;
  }
}

}  // namespace

OracleReport run_oracle_suite(std::uint64_t rng_seed, int instances) {
  std::mt19937_64 rng(rng_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  OracleReport report;

  auto record = [&report](bool ok, double err) {
    ++report.instances;
    if (!ok) ++report.failures;
    report.max_abs_error = std::max(report.max_abs_error, err);
  };

  for (int i = 0; i < instances; ++i) {
    const ReplicatedGaussian rg = random_instance(rng, 6, 5);
    const Eigen::VectorXd y =
        Eigen::VectorXd::NullaryExpr(rg.B0.rows(), [&]() { return gauss(rng); });
    const double x = gauss(rng);
    double err = 0.0;
    record(check_lemma_determinant(rg, &err), err);
    record(check_lemma_inverse(rg, &err), err);
    record(check_lemma_quadform(rg, y, x, &err), err);
    record(check_theorem(rg, y, x, &err), err);
  }

  // Diagonally dominant draws keep both the replicated assembly and the
  // collapsed matrix safely positive definite.
  std::uniform_int_distribution<int> n_dist(1, 4);
  std::uniform_int_distribution<int> w_dist(1, 3);
  std::uniform_real_distribution<double> u_dist(0.8, 3.0);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const int corollary_instances = std::max(1, instances / 5);
  for (int i = 0; i < corollary_instances; ++i) {
    const int n = n_dist(rng);
    std::vector<CorollarySpec> specs(n);
    Eigen::VectorXd y(n);
    for (int k = 0; k < n; ++k) {
      specs[k].b = Eigen::VectorXd::NullaryExpr(
          k, [&]() { return 0.05 * unif(rng); });
      specs[k].u = u_dist(rng);
      specs[k].w = w_dist(rng);
      y[k] = gauss(rng);
    }
    double err = 0.0;
    bool ok;
    try {
      ok = check_corollary(specs, y, &err);
    } catch (const std::runtime_error&) {
      --i;  // assembled matrix not PD; rare with small b, just redraw
      continue;
    }
    record(ok, err);
  }
  return report;
}

}  // namespace lmft
