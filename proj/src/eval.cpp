#include "lmft/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace lmft {

double dtw(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int window) {
  if (a.cols() != b.cols()) {
    throw std::invalid_argument("dtw: channel count mismatch");
  }
  const Eigen::Index na = a.rows();
  const Eigen::Index nb = b.rows();
  if (na == 0 || nb == 0) {
    throw std::invalid_argument("dtw: empty sequence");
  }
  constexpr double inf = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd D = Eigen::MatrixXd::Constant(na + 1, nb + 1, inf);
  D(0, 0) = 0.0;
  for (Eigen::Index i = 1; i <= na; ++i) {
    Eigen::Index lo = 1;
    Eigen::Index hi = nb;
    if (window >= 0) {
      lo = std::max<Eigen::Index>(1, i - window);
      hi = std::min<Eigen::Index>(nb, i + window);
    }
    for (Eigen::Index j = lo; j <= hi; ++j) {
      const double cost = (a.row(i - 1) - b.row(j - 1)).norm();
      D(i, j) = cost + std::min({D(i - 1, j), D(i, j - 1), D(i - 1, j - 1)});
    }
  }
  return D(na, nb);
}

ZScoreResult zscore_channels(const std::vector<Eigen::MatrixXd>& corpus) {
  if (corpus.empty()) {
    throw std::invalid_argument("zscore_channels: empty corpus");
  }
  const Eigen::Index cols = corpus.front().cols();
  Eigen::Index total = 0;
  for (const Eigen::MatrixXd& m : corpus) {
    if (m.cols() != cols) {
      throw std::invalid_argument("zscore_channels: column count mismatch");
    }
    total += m.rows();
  }
  if (total < 2) {
    throw std::invalid_argument("zscore_channels: need >= 2 rows overall");
  }

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(cols);
  for (const Eigen::MatrixXd& m : corpus) mean += m.colwise().sum();
  mean /= static_cast<double>(total);

  Eigen::VectorXd ss = Eigen::VectorXd::Zero(cols);
  for (const Eigen::MatrixXd& m : corpus) {
    ss += (m.rowwise() - mean.transpose()).array().square().colwise().sum().matrix();
  }
  Eigen::VectorXd sd = (ss / static_cast<double>(total - 1)).cwiseSqrt();

  ZScoreResult out;
  out.series = corpus;
  out.constant_column.assign(cols, false);
  for (Eigen::Index c = 0; c < cols; ++c) {
    if (sd[c] <= 0.0) {
      out.constant_column[c] = true;
      continue;
    }
    for (Eigen::MatrixXd& m : out.series) {
      m.col(c) = (m.col(c).array() - mean[c]) / sd[c];
    }
  }
  return out;
}

std::vector<std::string> nn1_classify(
    const std::vector<std::pair<Eigen::MatrixXd, std::string>>& train,
    const std::vector<Eigen::MatrixXd>& test, bool scale) {
  if (train.empty()) {
    throw std::invalid_argument("nn1_classify: empty training set");
  }
  std::vector<Eigen::MatrixXd> train_m, test_m;
  train_m.reserve(train.size());
  for (const auto& [m, label] : train) train_m.push_back(m);
  test_m = test;
  if (scale) {
    std::vector<Eigen::MatrixXd> joint = train_m;
    joint.insert(joint.end(), test_m.begin(), test_m.end());
    ZScoreResult z = zscore_channels(joint);
    std::copy(z.series.begin(), z.series.begin() + train_m.size(),
              train_m.begin());
    std::copy(z.series.begin() + train_m.size(), z.series.end(),
              test_m.begin());
  }

  std::vector<std::string> predicted(test_m.size());
  for (size_t t = 0; t < test_m.size(); ++t) {
    double best = std::numeric_limits<double>::infinity();
    size_t best_idx = 0;
    for (size_t i = 0; i < train_m.size(); ++i) {
      const double d = dtw(test_m[t], train_m[i]);
      if (d < best) {
        best = d;
        best_idx = i;
      }
    }
    predicted[t] = train[best_idx].second;
  }
  return predicted;
}

ConfusionMatrix confusion(const std::vector<std::string>& truth,
                          const std::vector<std::string>& predicted,
                          const std::vector<std::string>& labels) {
  if (truth.size() != predicted.size()) {
    throw std::invalid_argument("confusion: length mismatch");
  }
  const int k = static_cast<int>(labels.size());
  auto index_of = [&](const std::string& s) {
    for (int i = 0; i < k; ++i) {
      if (labels[i] == s) return i;
    }
    throw std::invalid_argument("confusion: unknown label " + s);
  };
  ConfusionMatrix cm;
  cm.counts = Eigen::MatrixXi::Zero(k, k);
  cm.labels = labels;
  for (size_t i = 0; i < truth.size(); ++i) {
    ++cm.counts(index_of(truth[i]), index_of(predicted[i]));
  }
  return cm;
}

Metrics metrics(const ConfusionMatrix& cm) {
  const Eigen::Index k = cm.counts.rows();
  if (k != cm.counts.cols() || k < 2) {
    throw std::invalid_argument("metrics: need a square confusion matrix, k >= 2");
  }
  const double total = cm.counts.sum();
  if (total <= 0.0) {
    throw std::invalid_argument("metrics: empty confusion matrix");
  }
  Metrics m;
  m.accuracy = cm.counts.diagonal().sum() / total;
  if (k == 2) {
    // Positive class is index 1 (the last label).
    const double tp = cm.counts(1, 1);
    const double fp = cm.counts(0, 1);
    const double fn = cm.counts(1, 0);
    if (tp + fp > 0.0) m.precision = tp / (tp + fp);
    if (tp + fn > 0.0) m.recall = tp / (tp + fn);
    if (m.precision && m.recall && *m.precision + *m.recall > 0.0) {
      m.f1 = 2.0 * *m.precision * *m.recall / (*m.precision + *m.recall);
    }
  }
  return m;
}

}  // namespace lmft
