#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

namespace lmft {

// Dynamic time warping distance between multichannel sequences (rows are
// time steps, columns channels). Local cost is the Euclidean distance
// between aligned rows; the optimal monotone path's costs are summed.
// window < 0 means unconstrained; otherwise a Sakoe-Chiba band of that
// half-width is applied.
double dtw(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
           int window = -1);

// Standardizes each column to mean 0, sd 1 across the whole corpus.
// Zero-variance columns pass through unchanged and are flagged.
struct ZScoreResult {
  std::vector<Eigen::MatrixXd> series;
  std::vector<bool> constant_column;
};
ZScoreResult zscore_channels(const std::vector<Eigen::MatrixXd>& corpus);

// 1-nearest-neighbor classification under DTW. Ties go to the lowest
// training index. With scale=true, train and test are z-scored jointly
// before distances are taken.
std::vector<std::string> nn1_classify(
    const std::vector<std::pair<Eigen::MatrixXd, std::string>>& train,
    const std::vector<Eigen::MatrixXd>& test, bool scale);

struct ConfusionMatrix {
  Eigen::MatrixXi counts;  // indexed (true, predicted)
  std::vector<std::string> labels;
};

ConfusionMatrix confusion(const std::vector<std::string>& truth,
                          const std::vector<std::string>& predicted,
                          const std::vector<std::string>& labels);

// Binary metrics take the last label as the positive class. Ratios with a
// zero denominator are reported absent rather than zero.
struct Metrics {
  double accuracy = 0.0;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
};

Metrics metrics(const ConfusionMatrix& cm);

}  // namespace lmft
