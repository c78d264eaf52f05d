#include "lmft/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace lmft {

void TimeSeries::validate() const {
  if (values.rows() != times.size() || values.cols() < 1) {
    throw std::invalid_argument("TimeSeries: shape mismatch");
  }
  if (!channel_names.empty() &&
      static_cast<Eigen::Index>(channel_names.size()) != values.cols()) {
    throw std::invalid_argument("TimeSeries: channel name count mismatch");
  }
  for (Eigen::Index i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) {
      throw std::invalid_argument("TimeSeries: times not strictly increasing");
    }
  }
  if (!values.allFinite() || !times.allFinite()) {
    throw std::invalid_argument("TimeSeries: non-finite entries");
  }
}

double variable_noise_core(double x) {
  return 10.0 * std::sin(2.0 * std::numbers::pi * x / 50.0);
}

double variable_period_core(double x) {
  return 10.0 * std::sin(2.0 * std::numbers::pi * x * x / 20000.0);
}

TimeSeries gen_variable_noise(std::uint64_t seed, int n) {
  if (n < 10) throw std::invalid_argument("gen_variable_noise: n < 10");
  std::mt19937 rng(static_cast<std::uint32_t>(seed));
  std::normal_distribution<double> gauss(0.0, 1.0);
  TimeSeries ts;
  ts.times.resize(n);
  ts.values.resize(n, 1);
  ts.channel_names = {"y"};
  const double high_sd = std::sqrt(5.0);
  for (int i = 0; i < n; ++i) {
    const double x = i;
    ts.times[i] = x;
    const double sd = (x >= 450.0 && x <= 550.0) ? high_sd : 1.0;
    ts.values(i, 0) = variable_noise_core(x) + sd * gauss(rng);
  }
  return ts;
}

TimeSeries gen_variable_period(std::uint64_t seed) {
  std::mt19937 rng(static_cast<std::uint32_t>(seed));
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int n = 1001;
  TimeSeries ts;
  ts.times.resize(n);
  ts.values.resize(n, 1);
  ts.channel_names = {"y"};
  for (int i = 0; i < n; ++i) {
    const double x = i - 500;
    ts.times[i] = x;
    ts.values(i, 0) = variable_period_core(x) + gauss(rng);
  }
  return ts;
}

std::vector<std::pair<TimeSeries, std::string>> gen_labeled_segments(
    const std::vector<ClassSpec>& class_specs, int per_class, int seg_len,
    std::uint64_t seed) {
  if (class_specs.size() < 2) {
    throw std::invalid_argument("gen_labeled_segments: need >= 2 classes");
  }
  if (per_class < 0 || (per_class > 0 && seg_len < 10)) {
    throw std::invalid_argument("gen_labeled_segments: bad sizes");
  }
  std::mt19937 rng(static_cast<std::uint32_t>(seed));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<std::pair<TimeSeries, std::string>> corpus;
  corpus.reserve(class_specs.size() * per_class);
  for (const ClassSpec& spec : class_specs) {
    for (int s = 0; s < per_class; ++s) {
      // ~5% relative jitter keeps segments of one class similar but distinct.
      const double variance =
          std::max(1e-6, spec.variance * (1.0 + 0.05 * gauss(rng)));
      const double period =
          std::max(1e-3, spec.period * (1.0 + 0.05 * gauss(rng)));
      const double amplitude = spec.amplitude * (1.0 + 0.05 * gauss(rng));
      const double sd = std::sqrt(variance);
      TimeSeries ts;
      ts.times.resize(seg_len);
      ts.values.resize(seg_len, 1);
      ts.channel_names = {"y"};
      for (int i = 0; i < seg_len; ++i) {
        ts.times[i] = i;
        ts.values(i, 0) =
            amplitude * std::sin(2.0 * std::numbers::pi * i / period) +
            sd * gauss(rng);
      }
      corpus.emplace_back(std::move(ts), spec.label);
    }
  }
  return corpus;
}

}  // namespace lmft
