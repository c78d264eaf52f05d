#include "lmft/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <stdexcept>
#include <thread>

namespace lmft {

void SeedStrategy::validate() const {
  if ((kind == Kind::MultiSeed || kind == Kind::NeighborPlusExemplar) &&
      count < 1) {
    throw std::invalid_argument("SeedStrategy: count >= 1 required");
  }
  if (!(0.0 < lo && lo < hi)) {
    throw std::invalid_argument("SeedStrategy: need 0 < lo < hi");
  }
}

namespace {

std::vector<Eigen::VectorXd> draw_loguniform_seeds(int count, double lo,
                                                   double hi, int dim,
                                                   std::uint64_t rng_seed) {
  std::mt19937_64 rng(rng_seed);
  std::uniform_real_distribution<double> unif(std::log(lo), std::log(hi));
  std::vector<Eigen::VectorXd> seeds(count);
  for (int s = 0; s < count; ++s) {
    seeds[s] = Eigen::VectorXd::NullaryExpr(
        dim, [&](Eigen::Index) { return std::exp(unif(rng)); });
  }
  return seeds;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(),
                                           static_cast<Eigen::Index>(v.size()));
}

}  // namespace

std::pair<Eigen::VectorXd, FitResult> lmft_at(
    double q, const TimeSeries& series, int channel, const KernelSpec& kernel,
    const CovExpr& expr, const std::vector<Eigen::VectorXd>& seeds,
    const FitOptions& opts) {
  const int n_free = expr.free_count();
  if (n_free == 0) {
    throw std::invalid_argument("lmft_at: expression has no free parameters");
  }
  if (channel < 0 || channel >= series.values.cols()) {
    throw std::invalid_argument("lmft_at: channel out of range");
  }
  WeightVector weights = normalize_mean1(kernel_weights(kernel, series.times, q));
  const std::vector<int> retained = weights.retained_indices();
  if (static_cast<int>(retained.size()) < 2 * n_free) {
    throw std::runtime_error("lmft_at: too few points in kernel support");
  }
  Eigen::VectorXd X(retained.size()), y(retained.size());
  for (size_t i = 0; i < retained.size(); ++i) {
    X[i] = series.times[retained[i]];
    y[i] = series.values(retained[i], channel);
  }
  FitResult result =
      fit(expr, X, y, weights.retained_normalized(), seeds, opts);
  return {to_vector(result.expr.free_values()), result};
}

namespace {

struct CellTask {
  bool ok = false;
  Eigen::VectorXd values;
  FitResult result;
};

CellTask run_cell(double q, const TimeSeries& series, int channel,
                  const KernelSpec& kernel, const CovExpr& expr,
                  const std::vector<Eigen::VectorXd>& seeds,
                  const FitOptions& opts) {
  CellTask cell;
  try {
    auto [values, result] = lmft_at(q, series, channel, kernel, expr, seeds, opts);
    cell.ok = true;
    cell.values = std::move(values);
    cell.result = std::move(result);
  } catch (const std::exception&) {
    cell.ok = false;
  }
  return cell;
}

double weight_mean_at(const KernelSpec& kernel, const TimeSeries& series,
                      double q) {
  try {
    WeightVector wv = normalize_mean1(kernel_weights(kernel, series.times, q));
    return wv.retained_normalized().mean();
  } catch (const std::exception&) {
    return 0.0;
  }
}

}  // namespace

FeatureSeries extract(const TimeSeries& series,
                      const Eigen::VectorXd& query_times,
                      const KernelSpec& kernel, const CovExpr& expr,
                      const SeedStrategy& strategy, int threads,
                      const FitOptions& opts) {
  series.validate();
  kernel.validate();
  expr.validate();
  strategy.validate();
  if (query_times.size() == 0) {
    throw std::invalid_argument("extract: empty query grid");
  }
  for (Eigen::Index i = 1; i < query_times.size(); ++i) {
    if (query_times[i] < query_times[i - 1]) {
      throw std::invalid_argument("extract: query times must be sorted");
    }
  }
  const int n_free = expr.free_count();
  if (n_free == 0) {
    throw std::invalid_argument("extract: expression has no free parameters");
  }
  const Eigen::Index nq = query_times.size();
  const Eigen::Index nc = series.values.cols();
  threads = std::max(1, threads);

  FeatureSeries out;
  out.query_times = query_times;
  out.features.resize(nq, nc * n_free);
  out.diagnostics.assign(nq, std::vector<CellDiagnostics>(nc));
  const std::vector<std::string> param_names = expr.free_names();
  for (Eigen::Index c = 0; c < nc; ++c) {
    const std::string channel_name =
        static_cast<size_t>(c) < series.channel_names.size()
            ? series.channel_names[c]
            : "ch" + std::to_string(c);
    for (int f = 0; f < n_free; ++f) {
      out.feature_names.push_back(channel_name + "." + param_names[f]);
    }
  }

  std::vector<std::vector<CellTask>> cells(nq, std::vector<CellTask>(nc));

  const SeedOrigin origin =
      strategy.kind == SeedStrategy::Kind::Fixed      ? SeedOrigin::Fixed
      : strategy.kind == SeedStrategy::Kind::MultiSeed ? SeedOrigin::MultiSeed
                                                       : SeedOrigin::Neighbor;
  FitOptions cell_opts = opts;
  cell_opts.seed_origin = origin;

  if (strategy.kind == SeedStrategy::Kind::Fixed ||
      strategy.kind == SeedStrategy::Kind::MultiSeed) {
    std::vector<Eigen::VectorXd> seeds;
    if (strategy.kind == SeedStrategy::Kind::Fixed) {
      seeds = {to_vector(expr.free_values())};
    } else {
      seeds = draw_loguniform_seeds(strategy.count, strategy.lo, strategy.hi,
                                    n_free, strategy.rng_seed);
    }
    std::atomic<Eigen::Index> next(0);
    auto worker = [&]() {
      for (;;) {
        const Eigen::Index idx = next.fetch_add(1);
        if (idx >= nq * nc) break;
        const Eigen::Index qi = idx / nc;
        const Eigen::Index c = idx % nc;
        cells[qi][c] = run_cell(query_times[qi], series, static_cast<int>(c),
                                kernel, expr, seeds, cell_opts);
      }
    };
    if (threads == 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
      for (std::thread& t : pool) t.join();
    }
  } else {
    // Neighbor chains are sequential along time; channels are independent.
    std::atomic<Eigen::Index> next_channel(0);
    auto worker = [&]() {
      for (;;) {
        const Eigen::Index c = next_channel.fetch_add(1);
        if (c >= nc) break;
        std::vector<Eigen::VectorXd> exemplar;
        if (strategy.kind == SeedStrategy::Kind::NeighborPlusExemplar) {
          const std::vector<Eigen::VectorXd> ms = draw_loguniform_seeds(
              strategy.count, strategy.lo, strategy.hi, n_free,
              strategy.rng_seed);
          const CellTask first =
              run_cell(query_times[0], series, static_cast<int>(c), kernel,
                       expr, ms, cell_opts);
          if (first.ok) exemplar = {first.values};
        }
        Eigen::VectorXd previous = to_vector(expr.free_values());
        for (Eigen::Index qi = 0; qi < nq; ++qi) {
          std::vector<Eigen::VectorXd> seeds = {previous};
          seeds.insert(seeds.end(), exemplar.begin(), exemplar.end());
          cells[qi][c] = run_cell(query_times[qi], series,
                                  static_cast<int>(c), kernel, expr, seeds,
                                  cell_opts);
          if (cells[qi][c].ok) previous = cells[qi][c].values;
        }
      }
    };
    if (threads == 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      const int n_workers = std::min<int>(threads, static_cast<int>(nc));
      for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
      for (std::thread& t : pool) t.join();
    }
  }

  // Assemble features; failed cells borrow the nearest successful value.
  for (Eigen::Index c = 0; c < nc; ++c) {
    for (Eigen::Index qi = 0; qi < nq; ++qi) {
      CellDiagnostics& diag = out.diagnostics[qi][c];
      const CellTask& cell = cells[qi][c];
      diag.weight_mean = weight_mean_at(kernel, series, query_times[qi]);
      if (cell.ok) {
        diag.converged = cell.result.converged;
        diag.log_marginal = cell.result.log_marginal;
        diag.seed_origin = cell.result.seed_origin;
        out.features.block(qi, c * n_free, 1, n_free) =
            cell.values.transpose();
        continue;
      }
      diag.filled = true;
      Eigen::Index donor = -1;
      for (Eigen::Index d = 1; d < nq; ++d) {
        if (qi - d >= 0 && cells[qi - d][c].ok) {
          donor = qi - d;
          break;
        }
        if (qi + d < nq && cells[qi + d][c].ok) {
          donor = qi + d;
          break;
        }
      }
      const Eigen::VectorXd fill =
          donor >= 0 ? cells[donor][c].values : to_vector(expr.free_values());
      out.features.block(qi, c * n_free, 1, n_free) = fill.transpose();
    }
  }
  return out;
}

Eigen::MatrixXd nw_smooth(const Eigen::VectorXd& xs, const Eigen::MatrixXd& ys,
                          const KernelSpec& kernel,
                          const Eigen::VectorXd& query_times) {
  if (ys.rows() != xs.size()) {
    throw std::invalid_argument("nw_smooth: shape mismatch");
  }
  Eigen::MatrixXd out(query_times.size(), ys.cols());
  for (Eigen::Index q = 0; q < query_times.size(); ++q) {
    const Eigen::VectorXd w = kernel_weights(kernel, xs, query_times[q]);
    const double total = w.sum();
    if (!(total > 0.0)) {
      throw std::runtime_error("nw_smooth: zero total weight at query " +
                               std::to_string(query_times[q]));
    }
    out.row(q) = (w.transpose() * ys) / total;
  }
  return out;
}

Eigen::MatrixXd loess(const Eigen::VectorXd& xs, const Eigen::MatrixXd& ys,
                      const KernelSpec& kernel,
                      const Eigen::VectorXd& query_times) {
  if (ys.rows() != xs.size()) {
    throw std::invalid_argument("loess: shape mismatch");
  }
  Eigen::MatrixXd out(query_times.size(), ys.cols());
  for (Eigen::Index qi = 0; qi < query_times.size(); ++qi) {
    const double q = query_times[qi];
    const Eigen::VectorXd w = kernel_weights(kernel, xs, q);
    // Weighted normal equations for y = m x + b over in-support points.
    double sw = 0.0, sx = 0.0, sxx = 0.0;
    int support = 0;
    double first_x = 0.0;
    bool distinct = false;
    for (Eigen::Index i = 0; i < xs.size(); ++i) {
      if (w[i] <= 0.0) continue;
      if (support == 0) {
        first_x = xs[i];
      } else if (xs[i] != first_x) {
        distinct = true;
      }
      ++support;
      sw += w[i];
      sx += w[i] * xs[i];
      sxx += w[i] * xs[i] * xs[i];
    }
    if (support < 2 || !distinct) {
      throw std::runtime_error("loess: degenerate neighborhood at query " +
                               std::to_string(q));
    }
    const double det = sw * sxx - sx * sx;
    for (Eigen::Index c = 0; c < ys.cols(); ++c) {
      double sy = 0.0, sxy = 0.0;
      for (Eigen::Index i = 0; i < xs.size(); ++i) {
        if (w[i] <= 0.0) continue;
        sy += w[i] * ys(i, c);
        sxy += w[i] * xs[i] * ys(i, c);
      }
      const double m = (sw * sxy - sx * sy) / det;
      const double b = (sxx * sy - sx * sxy) / det;
      out(qi, c) = m * q + b;
    }
  }
  return out;
}

namespace {

double quartic_value(QuarticFamily family, double h, double k, double x) {
  if (family == QuarticFamily::NeighborQuartic) {
    return 3.0 * std::pow(x, 4) - 4.0 * (k + h) * std::pow(x, 3) +
           6.0 * k * h * x * x;
  }
  const double d = x - h;
  return std::pow(d, 4) - 2.0 * d * d;
}

double quartic_grad(QuarticFamily family, double h, double k, double x) {
  if (family == QuarticFamily::NeighborQuartic) {
    return 12.0 * x * (x - h) * (x - k);
  }
  const double d = x - h;
  return 4.0 * d * (d * d - 1.0);
}

double descend(QuarticFamily family, double h, double k, double x0) {
  // The seed can land exactly on a critical point that has just turned into
  // a maximum; probe both sides first and keep the lowest of the three.
  const double eps = 1e-3;
  double x = x0;
  double fx = quartic_value(family, h, k, x);
  for (const double cand : {x0 + eps, x0 - eps}) {
    const double fc = quartic_value(family, h, k, cand);
    if (fc < fx) {
      x = cand;
      fx = fc;
    }
  }
  double step = 1e-3;
  for (int iter = 0; iter < 200000; ++iter) {
    const double g = quartic_grad(family, h, k, x);
    if (std::abs(g) < 1e-10) break;
    double x_new = x - step * g;
    double f_new = quartic_value(family, h, k, x_new);
    while (f_new > fx && step > 1e-12) {
      step *= 0.5;
      x_new = x - step * g;
      f_new = quartic_value(family, h, k, x_new);
    }
    x = x_new;
    fx = f_new;
    step = std::min(step * 2.0, 1e-3);
  }
  return x;
}

}  // namespace

SeedDemoResult seed_demo(QuarticFamily family,
                         const std::vector<std::pair<double, double>>& grid,
                         double fixed_seed) {
  SeedDemoResult out;
  out.optima.reserve(grid.size());
  double previous = fixed_seed;
  for (const auto& [h, k] : grid) {
    const double start =
        family == QuarticFamily::NeighborQuartic ? previous : fixed_seed;
    const double opt = descend(family, h, k, start);
    out.optima.push_back(opt);
    previous = opt;
  }
  if (out.optima.size() >= 2) {
    std::vector<double> diffs(out.optima.size() - 1);
    for (size_t i = 0; i + 1 < out.optima.size(); ++i) {
      diffs[i] = std::abs(out.optima[i + 1] - out.optima[i]);
    }
    std::vector<double> sorted = diffs;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2,
                     sorted.end());
    const double median = std::max(sorted[sorted.size() / 2], 1e-12);
    out.jump_flag.resize(diffs.size());
    for (size_t i = 0; i < diffs.size(); ++i) {
      out.jump_flag[i] = diffs[i] > 10.0 * median;
      if (out.jump_flag[i]) ++out.flagged_jumps;
    }
  }
  return out;
}

}  // namespace lmft
