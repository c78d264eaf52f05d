#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lmft/covfn.hpp"
#include "lmft/kernels.hpp"
#include "lmft/timeseries.hpp"
#include "lmft/wgpr.hpp"

namespace lmft {

/// How optimizer restarts are chosen per local fit. Fixed uses the
/// expression's own free seeds at every query. Neighbor seeds each query
/// with the previous query's optimum (expression seeds at the first).
/// MultiSeed draws `count` seeds log-uniformly on [lo, hi], once, from
/// rng_seed. NeighborPlusExemplar seeds with both the neighbor optimum and
/// an exemplar optimum obtained by a multi-seed fit at the first query.
struct SeedStrategy {
  enum class Kind { Fixed, Neighbor, MultiSeed, NeighborPlusExemplar };
  Kind kind = Kind::Fixed;
  int count = 100;
  double lo = 1e-10;
  double hi = 1e10;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

struct CellDiagnostics {
  bool converged = false;
  bool filled = false;  // value carried from the nearest successful cell
  double log_marginal = 0.0;
  double weight_mean = 0.0;  // mean of retained normalized weights
  SeedOrigin seed_origin = SeedOrigin::Fixed;
};

struct FeatureSeries {
  Eigen::VectorXd query_times;
  Eigen::MatrixXd features;  // N_q x (N_c * N_f)
  std::vector<std::string> feature_names;
  std::vector<std::vector<CellDiagnostics>> diagnostics;  // [query][channel]
};

// One local fit: kernel weights against the series times, zeros dropped,
// mean-1 normalization, then a weighted GP fit from the given seeds. The
// returned vector holds the fitted free parameters in tree order.
// Requires at least 2 * free_count retained points in the kernel support.
std::pair<Eigen::VectorXd, FitResult> lmft_at(
    double q, const TimeSeries& series, int channel, const KernelSpec& kernel,
    const CovExpr& expr, const std::vector<Eigen::VectorXd>& seeds,
    const FitOptions& opts = {});

// Applies lmft_at over every (query, channel) cell. Neighbor strategies
// process queries in ascending order per channel; other strategies fan out
// over `threads` workers. Failed cells carry the nearest successful
// neighbor's value and are flagged.
FeatureSeries extract(const TimeSeries& series,
                      const Eigen::VectorXd& query_times,
                      const KernelSpec& kernel, const CovExpr& expr,
                      const SeedStrategy& strategy, int threads = 1,
                      const FitOptions& opts = {});

// Nadaraya-Watson smoother: per column, sum(y K) / sum(K) at each query.
// Throws if the kernel's total weight vanishes at any query.
Eigen::MatrixXd nw_smooth(const Eigen::VectorXd& xs, const Eigen::MatrixXd& ys,
                          const KernelSpec& kernel,
                          const Eigen::VectorXd& query_times);

// Locally weighted least-squares line per query, evaluated at the query.
Eigen::MatrixXd loess(const Eigen::VectorXd& xs, const Eigen::MatrixXd& ys,
                      const KernelSpec& kernel,
                      const Eigen::VectorXd& query_times);

enum class QuarticFamily { NeighborQuartic, FixedQuartic };

struct SeedDemoResult {
  std::vector<double> optima;      // located optimum per sweep step
  std::vector<bool> jump_flag;     // per adjacent gap (size optima-1)
  int flagged_jumps = 0;
};

// Gradient-descent demonstration of seeding (dis)continuities on the
// quartic families 3x^4 - 4(k+h)x^3 + 6khx^2 (neighbor-seeded: each step
// starts at the previous step's optimum) and (x-h)^4 - 2(x-h)^2 (every step
// starts at fixed_seed). For the fixed family only the first element of
// each grid pair is used. A gap is flagged when the adjacent optimum
// difference exceeds 10x the median adjacent difference.
SeedDemoResult seed_demo(QuarticFamily family,
                         const std::vector<std::pair<double, double>>& grid,
                         double fixed_seed = 0.0);

}  // namespace lmft
