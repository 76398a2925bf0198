#include <doctest.h>

#include "hydra/io.hpp"
#include "hydra/metrics.hpp"
#include "helpers.hpp"

using namespace hydra;
using namespace hydra::metrics;

namespace {

ClassWeights unit_weights(int m) { return ClassWeights(Eigen::VectorXd::Ones(m), -1); }

}  // namespace

TEST_CASE("confusion matrix from identity predictions") {
  std::vector<int> labels = {0, 1, 2};
  const ConfusionMatrix c = build_confusion(labels, labels, 3);
  CHECK(c.counts(0, 0) == 1);
  CHECK(c.counts(1, 1) == 1);
  CHECK(c.counts(2, 2) == 1);
  CHECK(c.total() == 3);
}

TEST_CASE("confusion matrix hand-counted example") {
  // truth A A B B C, pred A B B B C
  std::vector<int> truth = {0, 0, 1, 1, 2};
  std::vector<int> pred = {0, 1, 1, 1, 2};
  const ConfusionMatrix c = build_confusion(pred, truth, 3);
  CHECK(c.counts(0, 0) == 1);
  CHECK(c.counts(0, 1) == 1);
  CHECK(c.counts(1, 1) == 2);
  CHECK(c.counts(2, 2) == 1);
  CHECK(c.total() == 5);

  SUBCASE("per-class precision/recall/F") {
    const ClassPRF a = class_prf(c, 0);
    CHECK(a.precision == doctest::Approx(1.0));
    CHECK(a.recall == doctest::Approx(0.5));
    CHECK(a.f == doctest::Approx(2.0 / 3.0));
    const ClassPRF b = class_prf(c, 1);
    CHECK(b.precision == doctest::Approx(2.0 / 3.0));
    CHECK(b.recall == doctest::Approx(1.0));
    CHECK(b.f == doctest::Approx(0.8));
  }

  SUBCASE("weighted F-measure with unit weights") {
    CHECK(weighted_fmeasure(c, unit_weights(3)) ==
          doctest::Approx((2.0 / 3.0 + 0.8 + 1.0) / 3.0).epsilon(1e-12));
  }
}

TEST_CASE("empty label lists give a zero matrix") {
  const ConfusionMatrix c = build_confusion(std::vector<int>{}, std::vector<int>{}, 4);
  CHECK(c.total() == 0);
  for (int i = 0; i < 4; ++i) CHECK(class_prf(c, i).f == 0.0);
}

TEST_CASE("out-of-range labels are rejected with the offending index") {
  std::vector<int> good = {0, 1};
  std::vector<int> bad = {0, 7};
  CHECK_THROWS_WITH_AS(build_confusion(bad, good, 3),
                       doctest::Contains("index 1"), ContractError);
  CHECK_THROWS_AS(build_confusion(good, bad, 3), ContractError);
}

TEST_CASE("degenerate class yields zeros but keeps its weight") {
  // Class 2 never appears: F_2 = 0 yet w_2 stays in the denominator.
  std::vector<int> labels = {0, 1};
  const ConfusionMatrix c = build_confusion(labels, labels, 3);
  const ClassPRF d = class_prf(c, 2);
  CHECK(d.precision == 0.0);
  CHECK(d.recall == 0.0);
  CHECK(d.f == 0.0);
  CHECK(weighted_fmeasure(c, unit_weights(3)) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("perfect predictions with positive-weight classes score 1") {
  std::vector<int> labels = {0, 1, 2, 0, 1, 2};
  const ConfusionMatrix c = build_confusion(labels, labels, 3);
  CHECK(weighted_fmeasure(c, unit_weights(3)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("misrouting a region to false detection lowers the score") {
  // Even with weight 0 on false detections, the victim class gains a false
  // negative, so the score drops.
  Eigen::VectorXd w = Eigen::VectorXd::Ones(3);
  const ClassWeights weights(w, 2);
  std::vector<int> truth = {0, 0, 1, 1};
  std::vector<int> good = {0, 0, 1, 1};
  std::vector<int> misrouted = {0, 2, 1, 1};
  const double before = weighted_fmeasure(build_confusion(good, truth, 3), weights);
  const double after = weighted_fmeasure(build_confusion(misrouted, truth, 3), weights);
  CHECK(after < before);
  CHECK(after == doctest::Approx(testutil::fbar_oracle(misrouted, truth, weights.w)).epsilon(1e-12));
}

TEST_CASE("zero total weight is an error") {
  std::vector<int> labels = {0};
  const ConfusionMatrix c = build_confusion(labels, labels, 1);
  CHECK_THROWS_AS(ClassWeights(Eigen::VectorXd::Zero(1), -1), ContractError);
  CHECK_THROWS_AS(weighted_fmeasure(c, unit_weights(3)), ContractError);
}

TEST_CASE("oracle equivalence and invariants on random instances") {
  Rng rng(2024);
  for (int it = 0; it < 1000; ++it) {
    const int m = 2 + static_cast<int>(rng.uniform_int(9));
    const int n = 1 + static_cast<int>(rng.uniform_int(200));
    std::vector<int> pred(static_cast<std::size_t>(n)), truth(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
      pred[static_cast<std::size_t>(k)] = static_cast<int>(rng.uniform_int(m));
      truth[static_cast<std::size_t>(k)] = static_cast<int>(rng.uniform_int(m));
    }
    Eigen::VectorXd w(m);
    for (int i = 0; i < m; ++i) w[i] = rng.uniform(0.1, 2.0);
    const int fd = m - 1;
    const ClassWeights weights(w, fd);

    const double fbar = weighted_fmeasure(build_confusion(pred, truth, m), weights);
    CHECK(fbar == doctest::Approx(testutil::fbar_oracle(pred, truth, weights.w)).epsilon(1e-12));
    CHECK(fbar >= 0.0);
    CHECK(fbar <= 1.0);

    // Permutation invariance: shuffle (pred, truth) jointly.
    std::vector<std::size_t> order(static_cast<std::size_t>(n));
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    rng.shuffle(order);
    std::vector<int> pred2, truth2;
    for (std::size_t k : order) {
      pred2.push_back(pred[k]);
      truth2.push_back(truth[k]);
    }
    CHECK(weighted_fmeasure(build_confusion(pred2, truth2, m), weights) ==
          doctest::Approx(fbar).epsilon(1e-12));
  }
}

TEST_CASE("zero-weight leakage never helps") {
  Rng rng(77);
  for (int it = 0; it < 300; ++it) {
    const int m = 3 + static_cast<int>(rng.uniform_int(5));
    const int fd = m - 1;
    const int n = 2 + static_cast<int>(rng.uniform_int(40));
    std::vector<int> pred(static_cast<std::size_t>(n)), truth(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
      pred[static_cast<std::size_t>(k)] = static_cast<int>(rng.uniform_int(m));
      truth[static_cast<std::size_t>(k)] = static_cast<int>(rng.uniform_int(m));
    }
    Eigen::VectorXd w(m);
    for (int i = 0; i < m; ++i) w[i] = rng.uniform(0.1, 2.0);
    const ClassWeights weights(w, fd);
    const double base = weighted_fmeasure(build_confusion(pred, truth, m), weights);

    // Claiming a correctly predicted region as false detection never
    // increases the score, and strictly decreases it when the victim class
    // has positive weight.
    for (std::size_t k = 0; k < pred.size(); ++k) {
      if (pred[k] != truth[k]) continue;
      std::vector<int> as_fd = pred;
      as_fd[k] = fd;
      const double changed = weighted_fmeasure(build_confusion(as_fd, truth, m), weights);
      CHECK(changed <= base + 1e-12);
      if (weights.w[truth[k]] > 0.0) CHECK(changed < base);
      break;
    }

    // Misclassifying a false-detection region as a real class never
    // increases the score either.
    for (std::size_t k = 0; k < pred.size(); ++k) {
      if (!(truth[k] == fd && pred[k] == fd)) continue;
      std::vector<int> as_class = pred;
      as_class[k] = static_cast<int>(rng.uniform_int(m - 1));
      CHECK(weighted_fmeasure(build_confusion(as_class, truth, m), weights) <= base + 1e-12);
      break;
    }
  }
}

TEST_CASE("score_submission matches regions by id") {
  testutil::TempDir dir("score");
  const auto pred = dir.path() / "pred.csv";
  const auto truth = dir.path() / "truth.csv";
  const auto weights = dir.path() / "weights.csv";
  io::write_file_atomic(truth, "region_id,label\nR1,0\nR2,1\nR3,2\n");
  io::write_file_atomic(weights, "label_index,weight\n0,1.0\n1,0.6\n2,0\n");

  SUBCASE("perfect predictions in a different order") {
    io::write_file_atomic(pred, "region_id,label\nR3,2\nR1,0\nR2,1\n");
    const ScoreReport report = metrics::score_submission(pred.string(), truth.string(), weights.string());
    CHECK(report.fbar == doctest::Approx(1.0));
    CHECK(report.regions == 3);
  }

  SUBCASE("single wrong region scores like its induced matrix") {
    io::write_file_atomic(pred, "region_id,label\nR1,1\nR2,1\nR3,2\n");
    const ScoreReport report = metrics::score_submission(pred.string(), truth.string(), weights.string());
    CHECK(report.fbar ==
          doctest::Approx(testutil::fbar_oracle({1, 1, 2}, {0, 1, 2},
                                                (Eigen::VectorXd(3) << 1.0, 0.6, 0.0).finished()))
              .epsilon(1e-12));
  }

  SUBCASE("missing region is an error naming the id") {
    io::write_file_atomic(pred, "region_id,label\nR1,0\nR2,1\n");
    CHECK_THROWS_WITH_AS(metrics::score_submission(pred.string(), truth.string(), weights.string()),
                         doctest::Contains("R3"), DataError);
  }

  SUBCASE("duplicate region is an error") {
    io::write_file_atomic(pred, "region_id,label\nR1,0\nR2,1\nR3,2\nR3,2\n");
    CHECK_THROWS_WITH_AS(metrics::score_submission(pred.string(), truth.string(), weights.string()),
                         doctest::Contains("duplicate"), DataError);
  }

  SUBCASE("malformed weights file is an error") {
    io::write_file_atomic(pred, "region_id,label\nR1,0\nR2,1\nR3,2\n");
    io::write_file_atomic(weights, "label_index,weight\n0,1.0\n2,0\n");
    CHECK_THROWS_AS(metrics::score_submission(pred.string(), truth.string(), weights.string()),
                    DataError);
  }
}
