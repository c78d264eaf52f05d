#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lmft/eval.hpp"
#include "lmft/io.hpp"
#include "lmft/pipeline.hpp"
#include "lmft/replication.hpp"
#include "lmft/synth.hpp"

namespace {

int resolve_threads(int flag_value) {
  if (flag_value > 0) return flag_value;
  if (const char* env = std::getenv("LMFT_THREADS")) {
    const int parsed = std::atoi(env);
    if (parsed > 0) return parsed;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return nlohmann::json::parse(in);
}

void write_json(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

int run_synth(const std::string& kind, std::uint64_t seed,
              const std::string& out) {
  lmft::TimeSeries series;
  if (kind == "variable_noise") {
    series = lmft::gen_variable_noise(seed);
  } else if (kind == "variable_period") {
    series = lmft::gen_variable_period(seed);
  } else {
    throw std::invalid_argument("unknown generator kind '" + kind + "'");
  }
  lmft::write_csv(series, out);
  return 0;
}

int run_check_weights(std::uint64_t seed, int instances, const std::string& out,
                      bool verbose) {
  const lmft::OracleReport report = lmft::run_oracle_suite(seed, instances);
  const nlohmann::json j{{"instances", report.instances},
                         {"failures", report.failures},
                         {"max_abs_error", report.max_abs_error}};
  if (out.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    write_json(j, out);
    if (verbose) std::cout << j.dump(2) << '\n';
  }
  return report.failures == 0 ? 0 : 2;
}

int run_demo_seeds(const std::string& family, const std::string& out) {
  std::vector<std::pair<double, double>> grid;
  lmft::QuarticFamily fam;
  if (family == "neighbor") {
    fam = lmft::QuarticFamily::NeighborQuartic;
    for (double s = -0.5; s <= 1.2001; s += 0.05) {
      grid.emplace_back(1.0 + s, -1.0 + 3.0 * s);
    }
  } else if (family == "fixed") {
    fam = lmft::QuarticFamily::FixedQuartic;
    for (double h = -1.0; h <= 1.0001; h += 0.05) grid.emplace_back(h, 0.0);
  } else {
    throw std::invalid_argument("unknown family '" + family + "'");
  }
  const lmft::SeedDemoResult result = lmft::seed_demo(fam, grid, 1.0);
  std::ofstream os(out);
  if (!os) throw std::runtime_error("cannot write " + out);
  os << "h,k,optimum,jump_after\n";
  for (size_t i = 0; i < grid.size(); ++i) {
    os << grid[i].first << ',' << grid[i].second << ',' << result.optima[i]
       << ',' << (i < result.jump_flag.size() && result.jump_flag[i] ? 1 : 0)
       << '\n';
  }
  std::cout << "flagged_jumps=" << result.flagged_jumps << '\n';
  return 0;
}

int run_smooth(const std::string& in, const std::string& out,
               const nlohmann::json& kernel_json, bool use_loess) {
  const lmft::TimeSeries series = lmft::read_csv(in);
  const lmft::KernelSpec kernel = lmft::kernel_from_json(kernel_json);
  const Eigen::MatrixXd smoothed =
      use_loess
          ? lmft::loess(series.times, series.values, kernel, series.times)
          : lmft::nw_smooth(series.times, series.values, kernel, series.times);
  lmft::TimeSeries result = series;
  result.values = smoothed;
  lmft::write_csv(result, out);
  return 0;
}

// The classes differ only in noise variance; raw-sequence DTW cannot tell
// them apart, which is exactly what the local-model features fix. Each
// segment becomes a short trajectory of its locally fitted white-noise
// level (a fixed smooth term absorbs the shared sine) before 1NN + DTW.
Eigen::MatrixXd segment_noise_features(const lmft::TimeSeries& segment,
                                       int threads) {
  const lmft::CovExpr model = lmft::CovExpr::sum(
      {lmft::CovExpr::prod(
           {lmft::CovExpr::cn(lmft::Param::fixed(64.0)),
            lmft::CovExpr::rbf(lmft::Param::fixed(2.0))}),
       lmft::CovExpr::wn(lmft::Param::free_seed(1.0))});
  lmft::KernelSpec kernel;
  kernel.family = lmft::KernelFamily::Tricube;
  const double span = segment.times[segment.times.size() - 1] - segment.times[0];
  kernel.h = std::max(10.0, span * 0.3);
  const int n_queries = 10;
  Eigen::VectorXd queries(n_queries);
  for (int i = 0; i < n_queries; ++i) {
    queries[i] =
        segment.times[0] + span * (2.0 * i + 1.0) / (2.0 * n_queries);
  }
  lmft::SeedStrategy strategy;  // fixed seeding
  lmft::FitOptions opts;
  opts.mode = lmft::WeightingMode::NoiseOnly;
  return lmft::extract(segment, queries, kernel, model, strategy, threads,
                       opts)
      .features;
}

int run_classify(std::uint64_t seed, int train_per_class, int test_per_class,
                 int seg_len, bool scale, const std::string& out_prefix,
                 int threads) {
  const std::vector<lmft::ClassSpec> specs{{1.0, 50.0, 10.0, "low"},
                                           {5.0, 50.0, 10.0, "high"}};
  const auto train_corpus = lmft::gen_labeled_segments(
      specs, train_per_class, seg_len, seed);
  const auto test_corpus = lmft::gen_labeled_segments(
      specs, test_per_class, seg_len, seed + 1);

  std::vector<std::pair<Eigen::MatrixXd, std::string>> train;
  for (const auto& [series, label] : train_corpus) {
    train.emplace_back(segment_noise_features(series, threads), label);
  }
  std::vector<Eigen::MatrixXd> test;
  std::vector<std::string> truth;
  for (const auto& [series, label] : test_corpus) {
    test.push_back(segment_noise_features(series, threads));
    truth.push_back(label);
  }

  const std::vector<std::string> predicted =
      lmft::nn1_classify(train, test, scale);
  const lmft::ConfusionMatrix cm =
      lmft::confusion(truth, predicted, {"low", "high"});
  const lmft::Metrics m = lmft::metrics(cm);

  nlohmann::json j{{"confusion",
                    {{cm.counts(0, 0), cm.counts(0, 1)},
                     {cm.counts(1, 0), cm.counts(1, 1)}}},
                   {"labels", cm.labels},
                   {"accuracy", m.accuracy}};
  j["precision"] = m.precision ? nlohmann::json(*m.precision) : nullptr;
  j["recall"] = m.recall ? nlohmann::json(*m.recall) : nullptr;
  j["f1"] = m.f1 ? nlohmann::json(*m.f1) : nullptr;
  write_json(j, out_prefix + ".metrics.json");

  std::ofstream neighbors(out_prefix + ".neighbors.csv");
  if (!neighbors) {
    throw std::runtime_error("cannot write " + out_prefix + ".neighbors.csv");
  }
  neighbors << "test_index,true_label,predicted_label\n";
  for (size_t i = 0; i < predicted.size(); ++i) {
    neighbors << i << ',' << truth[i] << ',' << predicted[i] << '\n';
  }
  std::cout << "accuracy=" << m.accuracy << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Local model feature transformations over time series"};
  app.require_subcommand(1);

  int threads_flag = 0;
  bool verbose = false;
  app.add_flag("--verbose", verbose, "chatty output");
  app.add_option("--threads", threads_flag,
                 "worker threads (default: LMFT_THREADS or all cores)");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a contrived dataset");
  std::string synth_kind = "variable_noise";
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  synth->add_option("--kind", synth_kind, "variable_noise | variable_period");
  synth->add_option("--seed", synth_seed, "rng seed");
  synth->add_option("--out", synth_out, "output csv")->required();

  // extract / run
  auto* extract_cmd = app.add_subcommand("extract", "extract local features");
  auto* run_cmd = app.add_subcommand("run", "run a full experiment config");
  std::string config_path;
  int stride_override = 0;
  for (CLI::App* cmd : {extract_cmd, run_cmd}) {
    cmd->add_option("--config", config_path, "experiment json")->required();
    cmd->add_option("--stride", stride_override, "override query stride");
  }

  // smooth / loess
  auto* smooth_cmd = app.add_subcommand("smooth", "Nadaraya-Watson smoothing");
  auto* loess_cmd = app.add_subcommand("loess", "locally weighted lines");
  std::string sm_in, sm_out, sm_family = "tricube";
  double sm_h = 1.0;
  int sm_k = 1;
  for (CLI::App* cmd : {smooth_cmd, loess_cmd}) {
    cmd->add_option("--in", sm_in, "input csv")->required();
    cmd->add_option("--out", sm_out, "output csv")->required();
    cmd->add_option("--family", sm_family, "kernel family");
    cmd->add_option("--bandwidth", sm_h, "bandwidth h");
    cmd->add_option("--neighbors", sm_k, "neighbor count k (knn families)");
  }

  // classify
  auto* classify_cmd =
      app.add_subcommand("classify", "DTW + 1NN on a synthetic corpus");
  std::uint64_t cls_seed = 0;
  int cls_train = 20, cls_test = 20, cls_seg_len = 200;
  bool cls_scale = false;
  std::string cls_out = "classify";
  classify_cmd->add_option("--seed", cls_seed, "rng seed");
  classify_cmd->add_option("--train", cls_train, "training items per class");
  classify_cmd->add_option("--test", cls_test, "test items per class");
  classify_cmd->add_option("--seg-len", cls_seg_len, "segment length");
  classify_cmd->add_flag("--scale", cls_scale, "z-score channels jointly");
  classify_cmd->add_option("--out", cls_out, "output prefix");

  // check-weights
  auto* check_cmd =
      app.add_subcommand("check-weights", "verify the weighting identities");
  std::uint64_t chk_seed = 0;
  int chk_instances = 1000;
  std::string chk_out;
  check_cmd->add_option("--seed", chk_seed, "rng seed");
  check_cmd->add_option("--instances", chk_instances, "instances per check");
  check_cmd->add_option("--out", chk_out, "report json (default stdout)");

  // demo-seeds
  auto* demo_cmd =
      app.add_subcommand("demo-seeds", "seeding discontinuity demo");
  std::string demo_family = "neighbor";
  std::string demo_out = "demo_seeds.csv";
  demo_cmd->add_option("--family", demo_family, "neighbor | fixed");
  demo_cmd->add_option("--out", demo_out, "output csv");

  for (CLI::App* cmd : app.get_subcommands([](const CLI::App*) { return true; })) {
    cmd->fallthrough();
  }
  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) return run_synth(synth_kind, synth_seed, synth_out);
    if (*extract_cmd || *run_cmd) {
      lmft::ExperimentConfig config =
          lmft::config_from_json(load_json(config_path));
      if (stride_override > 0) {
        config.query_times.reset();
        config.query_stride = stride_override;
      }
      if (*extract_cmd) config.smoothing.reset();
      lmft::run(config, resolve_threads(threads_flag));
      return 0;
    }
    if (*smooth_cmd || *loess_cmd) {
      nlohmann::json kj{{"family", sm_family}};
      const lmft::KernelFamily fam = lmft::kernel_family_from_name(sm_family);
      lmft::KernelSpec probe;
      probe.family = fam;
      if (probe.has_fixed_bandwidth()) kj["h"] = sm_h;
      if (lmft::is_knn(fam)) kj["k"] = sm_k;
      if (fam == lmft::KernelFamily::Dirichlet) kj["n"] = sm_k;
      return run_smooth(sm_in, sm_out, kj, static_cast<bool>(*loess_cmd));
    }
    if (*classify_cmd) {
      return run_classify(cls_seed, cls_train, cls_test, cls_seg_len,
                          cls_scale, cls_out, resolve_threads(threads_flag));
    }
    if (*check_cmd) {
      return run_check_weights(chk_seed, chk_instances, chk_out, verbose);
    }
    if (*demo_cmd) return run_demo_seeds(demo_family, demo_out);
  } catch (const std::invalid_argument& e) {
    std::cerr << nlohmann::json{{"error", "validation"}, {"message", e.what()}}
                     .dump()
              << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", "numerical"}, {"message", e.what()}}
                     .dump()
              << '\n';
    return 2;
  }
  return 1;
}
