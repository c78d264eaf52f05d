#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "lmft/timeseries.hpp"

namespace lmft {

// Noiseless cores, exposed so generated data can be checked against the
// closed forms.
double variable_noise_core(double x);   // 10 sin(2 pi x / 50)
double variable_period_core(double x);  // 10 sin(2 pi x^2 / 20000)

// x = 0..999; unit-variance noise except variance 5 on x in [450, 550]
// (endpoints inclusive).
TimeSeries gen_variable_noise(std::uint64_t seed, int n = 1000);

// x = -500..500 step 1; unit-variance noise along the entire domain.
TimeSeries gen_variable_period(std::uint64_t seed);

/// One class of the labeled synthetic corpus: a noisy sine whose parameters
/// get a small relative Gaussian perturbation per emitted segment.
struct ClassSpec {
  double variance = 1.0;
  double period = 50.0;
  double amplitude = 10.0;
  std::string label;
};

std::vector<std::pair<TimeSeries, std::string>> gen_labeled_segments(
    const std::vector<ClassSpec>& class_specs, int per_class, int seg_len,
    std::uint64_t seed);

}  // namespace lmft
