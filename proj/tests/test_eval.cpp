#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "lmft/eval.hpp"

using namespace lmft;

namespace {

// Exhaustive enumeration of every monotone alignment path; ground truth for
// the DP implementation on tiny inputs.
double dtw_brute(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const int na = static_cast<int>(a.rows());
  const int nb = static_cast<int>(b.rows());
  double best = std::numeric_limits<double>::infinity();
  std::function<void(int, int, double)> walk = [&](int i, int j, double acc) {
    acc += (a.row(i) - b.row(j)).norm();
    if (acc >= best) return;
    if (i == na - 1 && j == nb - 1) {
      best = acc;
      return;
    }
    if (i + 1 < na) walk(i + 1, j, acc);
    if (j + 1 < nb) walk(i, j + 1, acc);
    if (i + 1 < na && j + 1 < nb) walk(i + 1, j + 1, acc);
  };
  walk(0, 0, 0.0);
  return best;
}

Eigen::MatrixXd random_seq(std::mt19937_64& rng, int len, int ch) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd m(len, ch);
  for (int i = 0; i < len; ++i)
    for (int j = 0; j < ch; ++j) m(i, j) = g(rng);
  return m;
}

}  // namespace

TEST_CASE("dtw basics") {
  Eigen::MatrixXd a(3, 1), b(3, 1);
  a << 1.0, 2.0, 3.0;
  b << 1.0, 2.0, 3.0;
  CHECK(dtw(a, b) == 0.0);
  Eigen::MatrixXd c(1, 1);
  c << 5.0;
  // Single point against a sequence: every row aligns to it.
  CHECK(dtw(a, c) == doctest::Approx(4.0 + 3.0 + 2.0));
  CHECK(dtw(a, b) == dtw(b, a));
}

TEST_CASE("dtw handles time warps that euclidean distance cannot") {
  Eigen::MatrixXd a(4, 1), b(5, 1);
  a << 0.0, 1.0, 0.0, 0.0;
  b << 0.0, 0.0, 1.0, 0.0, 0.0;
  CHECK(dtw(a, b) == 0.0);
}

TEST_CASE("dtw equals exhaustive enumeration on 400 random pairs") {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 400; ++t) {
    const int na = 1 + static_cast<int>(rng() % 6);
    const int nb = 1 + static_cast<int>(rng() % 6);
    const int ch = 1 + static_cast<int>(rng() % 2);
    const Eigen::MatrixXd a = random_seq(rng, na, ch);
    const Eigen::MatrixXd b = random_seq(rng, nb, ch);
    CHECK(dtw(a, b) == dtw_brute(a, b));
  }
}

TEST_CASE("sakoe-chiba band never beats the unconstrained distance") {
  std::mt19937_64 rng(23);
  for (int t = 0; t < 50; ++t) {
    const Eigen::MatrixXd a = random_seq(rng, 8, 1);
    const Eigen::MatrixXd b = random_seq(rng, 8, 1);
    const double free_dist = dtw(a, b);
    const double banded = dtw(a, b, 2);
    CHECK(banded >= free_dist - 1e-12);
    CHECK(dtw(a, b, 8) == doctest::Approx(free_dist));
  }
}

TEST_CASE("zscore standardizes across the corpus and flags constants") {
  std::vector<Eigen::MatrixXd> corpus;
  Eigen::MatrixXd m1(3, 2), m2(2, 2);
  m1 << 1.0, 5.0, 2.0, 5.0, 3.0, 5.0;
  m2 << 4.0, 5.0, 5.0, 5.0;
  corpus = {m1, m2};
  const ZScoreResult z = zscore_channels(corpus);
  REQUIRE(z.series.size() == 2);
  CHECK_FALSE(z.constant_column[0]);
  CHECK(z.constant_column[1]);
  // Column 0 pooled: mean 3, sample sd sqrt(2.5).
  const double sd = std::sqrt(2.5);
  CHECK(z.series[0](0, 0) == doctest::Approx((1.0 - 3.0) / sd).epsilon(1e-12));
  CHECK(z.series[1](1, 0) == doctest::Approx((5.0 - 3.0) / sd).epsilon(1e-12));
  // Constant column passes through unchanged.
  CHECK(z.series[0](0, 1) == 5.0);
  double total = 0.0;
  int count = 0;
  for (const auto& s : z.series) {
    total += s.col(0).sum();
    count += static_cast<int>(s.rows());
  }
  CHECK(total / count == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("1nn classification with tie to the lowest train index") {
  std::vector<std::pair<Eigen::MatrixXd, std::string>> train;
  Eigen::MatrixXd a(1, 1), b(1, 1), c(1, 1);
  a << 0.0;
  b << 0.0;  // same point, different label: tie
  c << 10.0;
  train = {{a, "first"}, {b, "second"}, {c, "far"}};
  Eigen::MatrixXd q(1, 1);
  q << 0.1;
  const auto pred = nn1_classify(train, {q}, /*scale=*/false);
  REQUIRE(pred.size() == 1);
  CHECK(pred[0] == "first");
}

TEST_CASE("confusion matrix layout") {
  const std::vector<std::string> truth = {"n", "n", "p", "p", "p"};
  const std::vector<std::string> pred = {"n", "p", "p", "p", "n"};
  const ConfusionMatrix cm = confusion(truth, pred, {"n", "p"});
  CHECK(cm.counts(0, 0) == 1);
  CHECK(cm.counts(0, 1) == 1);
  CHECK(cm.counts(1, 0) == 1);
  CHECK(cm.counts(1, 1) == 2);
}

TEST_CASE("metrics reproduce the published confusion counts") {
  ConfusionMatrix cm;
  cm.labels = {"negative", "positive"};
  cm.counts.resize(2, 2);
  cm.counts << 16, 3, 10, 9;
  const Metrics m = metrics(cm);
  CHECK(m.accuracy == doctest::Approx(25.0 / 38.0).epsilon(1e-15));
  REQUIRE(m.precision.has_value());
  REQUIRE(m.recall.has_value());
  REQUIRE(m.f1.has_value());
  CHECK(*m.precision == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(*m.recall == doctest::Approx(9.0 / 19.0).epsilon(1e-15));
  const double p = 0.75, r = 9.0 / 19.0;
  CHECK(*m.f1 == doctest::Approx(2.0 * p * r / (p + r)).epsilon(1e-12));
  // Rounded to two decimals these are the published 0.66 / 0.75 / 0.47.
  CHECK(std::round(m.accuracy * 100.0) / 100.0 == 0.66);
  CHECK(std::round(*m.recall * 100.0) / 100.0 == 0.47);
}

TEST_CASE("metrics report absent ratios instead of dividing by zero") {
  ConfusionMatrix cm;
  cm.labels = {"n", "p"};
  cm.counts.resize(2, 2);
  cm.counts << 5, 0, 0, 0;  // nothing predicted or truly positive
  const Metrics m = metrics(cm);
  CHECK(m.accuracy == 1.0);
  CHECK_FALSE(m.precision.has_value());
  CHECK_FALSE(m.recall.has_value());
  CHECK_FALSE(m.f1.has_value());
}
