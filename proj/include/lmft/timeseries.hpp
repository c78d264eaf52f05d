#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace lmft {

/// Timestamped multichannel observations. Times are strictly increasing.
struct TimeSeries {
  Eigen::VectorXd times;
  Eigen::MatrixXd values;  // N_t x N_c
  std::vector<std::string> channel_names;

  void validate() const;
};

}  // namespace lmft
