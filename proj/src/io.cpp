#include "lmft/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "lmft/synth.hpp"

namespace lmft {

namespace {

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

double parse_cell(const std::string& cell, size_t row) {
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end > begin && (end[-1] == ' ' || end[-1] == '\t' || end[-1] == '\r')) {
    --end;
  }
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw std::runtime_error("csv: non-numeric cell '" + cell + "' in row " +
                             std::to_string(row));
  }
  return value;
}

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

TimeSeries read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("csv: missing header in " + path);
  }
  std::vector<std::string> header = split_row(line);
  if (header.size() < 2) {
    throw std::runtime_error("csv: need a time column and >= 1 channel");
  }
  if (!header.back().empty() && header.back().back() == '\r') {
    header.back().pop_back();
  }
  const size_t cols = header.size();

  std::vector<double> times;
  std::vector<double> flat;
  size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> cells = split_row(line);
    if (cells.size() != cols) {
      throw std::runtime_error("csv: malformed row " + std::to_string(row) +
                               " (expected " + std::to_string(cols) +
                               " cells)");
    }
    const double t = parse_cell(cells[0], row);
    if (!times.empty() && !(t > times.back())) {
      throw std::runtime_error(
          "csv: time not strictly increasing at row " + std::to_string(row));
    }
    times.push_back(t);
    for (size_t c = 1; c < cols; ++c) flat.push_back(parse_cell(cells[c], row));
  }

  TimeSeries ts;
  const Eigen::Index n = static_cast<Eigen::Index>(times.size());
  const Eigen::Index nc = static_cast<Eigen::Index>(cols - 1);
  ts.times = Eigen::Map<Eigen::VectorXd>(times.data(), n);
  ts.values.resize(n, nc);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index c = 0; c < nc; ++c) ts.values(i, c) = flat[i * nc + c];
  }
  ts.channel_names.assign(header.begin() + 1, header.end());
  ts.validate();
  return ts;
}

namespace {

void write_table(const Eigen::VectorXd& times, const Eigen::MatrixXd& values,
                 const std::vector<std::string>& names,
                 const std::string& time_name, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("csv: cannot write " + path);
  out << time_name;
  for (Eigen::Index c = 0; c < values.cols(); ++c) {
    out << ',' << (static_cast<size_t>(c) < names.size()
                       ? names[c]
                       : "ch" + std::to_string(c));
  }
  out << '\n';
  for (Eigen::Index i = 0; i < times.size(); ++i) {
    out << format_value(times[i]);
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      out << ',' << format_value(values(i, c));
    }
    out << '\n';
  }
}

}  // namespace

void write_csv(const TimeSeries& series, const std::string& path) {
  write_table(series.times, series.values, series.channel_names, "time", path);
}

void write_csv(const FeatureSeries& features, const std::string& path) {
  write_table(features.query_times, features.features, features.feature_names,
              "time", path);
}

nlohmann::json diagnostics_to_json(const FeatureSeries& features) {
  nlohmann::json cells = nlohmann::json::array();
  for (size_t qi = 0; qi < features.diagnostics.size(); ++qi) {
    for (size_t c = 0; c < features.diagnostics[qi].size(); ++c) {
      const CellDiagnostics& d = features.diagnostics[qi][c];
      const char* origin = d.seed_origin == SeedOrigin::Fixed      ? "fixed"
                           : d.seed_origin == SeedOrigin::Neighbor ? "neighbor"
                                                                   : "multiseed";
      cells.push_back({{"query_index", qi},
                       {"channel", c},
                       {"converged", d.converged},
                       {"filled", d.filled},
                       {"log_marginal", d.log_marginal},
                       {"weight_mean", d.weight_mean},
                       {"seed_origin", origin}});
    }
  }
  return {{"cells", cells}};
}

namespace {

void reject_unknown_keys(const nlohmann::json& j,
                         const std::vector<std::string>& allowed,
                         const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw std::invalid_argument("config: unknown key '" + key + "' in " +
                                  where);
    }
  }
}

}  // namespace

nlohmann::json kernel_to_json(const KernelSpec& spec) {
  nlohmann::json j{{"family", kernel_family_name(spec.family)}};
  if (spec.has_fixed_bandwidth()) j["h"] = spec.h;
  if (is_knn(spec.family)) j["k"] = spec.k;
  if (spec.family == KernelFamily::Dirichlet) j["n"] = spec.dirichlet_n;
  return j;
}

KernelSpec kernel_from_json(const nlohmann::json& j) {
  reject_unknown_keys(j, {"family", "h", "k", "n"}, "kernel");
  KernelSpec spec;
  spec.family = kernel_family_from_name(j.at("family").get<std::string>());
  if (spec.has_fixed_bandwidth()) spec.h = j.at("h").get<double>();
  if (is_knn(spec.family)) spec.k = j.at("k").get<int>();
  if (spec.family == KernelFamily::Dirichlet) {
    spec.dirichlet_n = j.at("n").get<int>();
  }
  spec.validate();
  return spec;
}

nlohmann::json strategy_to_json(const SeedStrategy& strategy) {
  switch (strategy.kind) {
    case SeedStrategy::Kind::Fixed:
      return {{"kind", "fixed"}};
    case SeedStrategy::Kind::Neighbor:
      return {{"kind", "neighbor"}};
    case SeedStrategy::Kind::MultiSeed:
      return {{"kind", "multiseed"},
              {"count", strategy.count},
              {"lo", strategy.lo},
              {"hi", strategy.hi},
              {"rng_seed", strategy.rng_seed}};
    case SeedStrategy::Kind::NeighborPlusExemplar:
      return {{"kind", "neighbor_plus_exemplar"},
              {"count", strategy.count},
              {"lo", strategy.lo},
              {"hi", strategy.hi},
              {"rng_seed", strategy.rng_seed}};
  }
  throw std::logic_error("strategy_to_json: unreachable");
}

SeedStrategy strategy_from_json(const nlohmann::json& j) {
  SeedStrategy strategy;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "fixed" || kind == "neighbor") {
    reject_unknown_keys(j, {"kind"}, "strategy");
    strategy.kind = kind == "fixed" ? SeedStrategy::Kind::Fixed
                                    : SeedStrategy::Kind::Neighbor;
    return strategy;
  }
  if (kind != "multiseed" && kind != "neighbor_plus_exemplar") {
    throw std::invalid_argument("config: unknown strategy kind '" + kind + "'");
  }
  reject_unknown_keys(j, {"kind", "count", "lo", "hi", "rng_seed"}, "strategy");
  strategy.kind = kind == "multiseed" ? SeedStrategy::Kind::MultiSeed
                                      : SeedStrategy::Kind::NeighborPlusExemplar;
  strategy.count = j.at("count").get<int>();
  strategy.lo = j.at("lo").get<double>();
  strategy.hi = j.at("hi").get<double>();
  strategy.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  strategy.validate();
  return strategy;
}

nlohmann::json config_to_json(const ExperimentConfig& config) {
  nlohmann::json j;
  j["schema_version"] = ExperimentConfig::kSchemaVersion;
  nlohmann::json data;
  if (config.data_path) {
    data["path"] = *config.data_path;
  } else {
    data["generator"] = *config.generator_kind;
  }
  j["data"] = data;
  j["rng_seed"] = config.rng_seed;
  j["kernel"] = kernel_to_json(config.kernel);
  j["covariance"] = covexpr_to_json(config.covariance);
  j["strategy"] = strategy_to_json(config.strategy);
  if (config.query_times) {
    j["query"] = {{"times", *config.query_times}};
  } else {
    j["query"] = {{"stride", config.query_stride}};
  }
  j["weighting_mode"] = config.weighting_mode == WeightingMode::FullDiagonal
                            ? "full_diagonal"
                            : "noise_only";
  j["objective_form"] =
      config.objective_form == ObjectiveForm::Full ? "full" : "simplified";
  if (config.smoothing) j["smoothing"] = kernel_to_json(*config.smoothing);
  j["output"] = config.output_prefix;
  return j;
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  reject_unknown_keys(j,
                      {"schema_version", "data", "rng_seed", "kernel",
                       "covariance", "strategy", "query", "weighting_mode",
                       "objective_form", "smoothing", "output"},
                      "config");
  if (j.at("schema_version").get<int>() != ExperimentConfig::kSchemaVersion) {
    throw std::invalid_argument("config: unsupported schema_version");
  }
  ExperimentConfig config;
  const nlohmann::json& data = j.at("data");
  reject_unknown_keys(data, {"path", "generator"}, "data");
  if (data.contains("path") == data.contains("generator")) {
    throw std::invalid_argument(
        "config: data needs exactly one of path / generator");
  }
  if (data.contains("path")) {
    config.data_path = data.at("path").get<std::string>();
  } else {
    config.generator_kind = data.at("generator").get<std::string>();
    if (*config.generator_kind != "variable_noise" &&
        *config.generator_kind != "variable_period") {
      throw std::invalid_argument("config: unknown generator '" +
                                  *config.generator_kind + "'");
    }
  }
  config.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  config.kernel = kernel_from_json(j.at("kernel"));
  config.covariance = covexpr_from_json(j.at("covariance"));
  config.covariance.validate();
  config.strategy = strategy_from_json(j.at("strategy"));

  const nlohmann::json& query = j.at("query");
  reject_unknown_keys(query, {"stride", "times"}, "query");
  if (query.contains("stride") == query.contains("times")) {
    throw std::invalid_argument(
        "config: query needs exactly one of stride / times");
  }
  if (query.contains("stride")) {
    config.query_stride = query.at("stride").get<int>();
    if (config.query_stride < 1) {
      throw std::invalid_argument("config: query stride must be >= 1");
    }
  } else {
    config.query_times = query.at("times").get<std::vector<double>>();
  }

  const std::string mode = j.at("weighting_mode").get<std::string>();
  if (mode == "full_diagonal") {
    config.weighting_mode = WeightingMode::FullDiagonal;
  } else if (mode == "noise_only") {
    config.weighting_mode = WeightingMode::NoiseOnly;
  } else {
    throw std::invalid_argument("config: unknown weighting_mode '" + mode + "'");
  }
  const std::string form = j.at("objective_form").get<std::string>();
  if (form == "full") {
    config.objective_form = ObjectiveForm::Full;
  } else if (form == "simplified") {
    config.objective_form = ObjectiveForm::Simplified;
  } else {
    throw std::invalid_argument("config: unknown objective_form '" + form + "'");
  }
  if (j.contains("smoothing")) {
    config.smoothing = kernel_from_json(j.at("smoothing"));
  }
  config.output_prefix = j.at("output").get<std::string>();
  if (config.output_prefix.empty()) {
    throw std::invalid_argument("config: output prefix must be nonempty");
  }
  return config;
}

void run(const ExperimentConfig& config, int threads) {
  TimeSeries series;
  if (config.data_path) {
    series = read_csv(*config.data_path);
  } else if (*config.generator_kind == "variable_noise") {
    series = gen_variable_noise(config.rng_seed);
  } else {
    series = gen_variable_period(config.rng_seed);
  }

  Eigen::VectorXd query_times;
  if (config.query_times) {
    query_times = Eigen::Map<const Eigen::VectorXd>(
        config.query_times->data(),
        static_cast<Eigen::Index>(config.query_times->size()));
  } else {
    const Eigen::Index nq =
        (series.times.size() + config.query_stride - 1) / config.query_stride;
    query_times.resize(nq);
    for (Eigen::Index i = 0; i < nq; ++i) {
      query_times[i] = series.times[i * config.query_stride];
    }
  }

  SeedStrategy strategy = config.strategy;
  if (strategy.kind == SeedStrategy::Kind::MultiSeed ||
      strategy.kind == SeedStrategy::Kind::NeighborPlusExemplar) {
    // All randomness flows from the one config seed; the strategy stream is
    // split off deterministically.
    strategy.rng_seed = config.rng_seed ^ 0x9e3779b97f4a7c15ull;
  }
  FitOptions opts;
  opts.mode = config.weighting_mode;
  opts.form = config.objective_form;

  const FeatureSeries features = extract(series, query_times, config.kernel,
                                         config.covariance, strategy, threads,
                                         opts);
  write_csv(features, config.output_prefix + ".features.csv");
  std::ofstream diag(config.output_prefix + ".diagnostics.json");
  if (!diag) {
    throw std::runtime_error("run: cannot write diagnostics for prefix " +
                             config.output_prefix);
  }
  diag << diagnostics_to_json(features).dump(2) << '\n';

  if (config.smoothing) {
    const Eigen::MatrixXd smoothed = nw_smooth(
        features.query_times, features.features, *config.smoothing,
        features.query_times);
    FeatureSeries s = features;
    s.features = smoothed;
    write_csv(s, config.output_prefix + ".smoothed.csv");
  }
}

}  // namespace lmft
