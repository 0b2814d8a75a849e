#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "published_results.h"
#include "spamdet/error.h"
#include "spamdet/eval.h"
#include "spamdet/random.h"
#include "test_helpers.h"

using namespace spamdet;

namespace {
constexpr Label T = Label::truthful, D = Label::deceptive;
}

TEST(Metrics, Perfect) {
  auto m = metrics({T, D, T, D}, {T, D, T, D});
  EXPECT_EQ(m.accuracy, 1.0);
  EXPECT_EQ(m.truthful.f1, 1.0);
  EXPECT_EQ(m.deceptive.f1, 1.0);
}

TEST(Metrics, HandComputedConfusion) {
  auto m = metrics({T, T, D, D}, {T, D, D, D});
  EXPECT_DOUBLE_EQ(m.accuracy, 0.75);
  EXPECT_NEAR(m.deceptive.precision, 2.0 / 3.0, 1e-12);
  EXPECT_DOUBLE_EQ(m.deceptive.recall, 1.0);
  EXPECT_NEAR(m.deceptive.f1, 0.8, 1e-12);
  EXPECT_DOUBLE_EQ(m.truthful.precision, 1.0);
  EXPECT_DOUBLE_EQ(m.truthful.recall, 0.5);
  // Micro-averaged accuracy from the two classes' true positives.
  EXPECT_DOUBLE_EQ(m.accuracy, double(m.truthful.counts.tp + m.deceptive.counts.tp) / m.n);
}

TEST(Metrics, LengthMismatchRejected) { EXPECT_THROW(metrics({T}, {T, D}), ValidationError); }

TEST(Metrics, F1ZeroWhenNothingPredicted) {
  auto m = metrics({T, D}, {T, T});
  EXPECT_EQ(m.deceptive.f1, 0.0);
  EXPECT_EQ(m.deceptive.precision, 0.0);
}

TEST(Metrics, PublishedRowsAreInternallyConsistent) {
  for (const auto& row : published::kBenchmark) {
    EXPECT_NEAR(f1_score(row.truthful.precision, row.truthful.recall), row.truthful.f1, 0.01) << row.method;
    EXPECT_NEAR(f1_score(row.deceptive.precision, row.deceptive.recall), row.deceptive.f1, 0.01) << row.method;
  }
}

TEST(Sweep, PerfectSeparation) {
  Eigen::VectorXd s(4);
  s << 0.1, 0.2, 0.8, 0.9;
  auto r = threshold_sweep(s, {T, T, D, D});
  ASSERT_TRUE(r.auc);
  EXPECT_DOUBLE_EQ(*r.auc, 1.0);
  EXPECT_DOUBLE_EQ(r.best_f1, 1.0);
  EXPECT_DOUBLE_EQ(r.best_threshold, 0.8);
}

TEST(Sweep, AllEqualScoresGiveHalf) {
  Eigen::VectorXd s = Eigen::VectorXd::Constant(6, 0.3);
  auto r = threshold_sweep(s, {T, D, T, T, D, T});
  EXPECT_DOUBLE_EQ(*r.auc, 0.5);
  EXPECT_EQ(r.roc.size(), 2u);
}

TEST(Sweep, RandomScoresNearHalf) {
  Rng rng(8);
  std::uniform_real_distribution<double> u(0, 1);
  Eigen::VectorXd s(10000);
  std::vector<Label> y(10000);
  for (int i = 0; i < 10000; ++i) {
    s(i) = u(rng);
    y[i] = i % 2 ? D : T;
  }
  auto r = threshold_sweep(s, y, 11);
  EXPECT_NEAR(*r.auc, 0.5, 0.02);
  EXPECT_EQ(r.roc.size(), 11u);
  for (std::size_t i = 1; i < r.roc.size(); ++i) {
    EXPECT_GE(r.roc[i].fpr, r.roc[i - 1].fpr);
    EXPECT_GE(r.roc[i].tpr, r.roc[i - 1].tpr);
  }
}

TEST(Sweep, SingleClassAucUndefined) {
  spamdet::testing::WarningCapture w;
  Eigen::VectorXd s(3);
  s << 1, 2, 3;
  auto r = threshold_sweep(s, {T, T, T});
  EXPECT_FALSE(r.auc);
  EXPECT_EQ(w.messages.size(), 1u);
  EXPECT_TRUE(r.to_json()["auc"].is_null());
}

TEST(Sweep, MatchesPairCountingAuc) {
  Rng rng(2);
  std::uniform_int_distribution<int> u(0, 9);  // heavy ties
  Eigen::VectorXd s(300);
  std::vector<Label> y(300);
  for (int i = 0; i < 300; ++i) {
    y[i] = i % 3 == 0 ? D : T;
    s(i) = u(rng) + (y[i] == D ? 2 : 0);
  }
  double wins = 0, pairs = 0;
  for (int i = 0; i < 300; ++i)
    for (int j = 0; j < 300; ++j)
      if (y[i] == D && y[j] == T) {
        pairs += 1;
        wins += s(i) > s(j) ? 1.0 : s(i) == s(j) ? 0.5 : 0.0;
      }
  EXPECT_NEAR(*threshold_sweep(s, y).auc, wins / pairs, 1e-12);
}

TEST(ContaminationThreshold, FlagsTopFraction) {
  Eigen::VectorXd s(10);
  s << 5, 1, 9, 3, 7, 2, 8, 4, 6, 0;
  EXPECT_EQ(contamination_threshold(s, 0.2), 8.0);
  EXPECT_EQ(contamination_threshold(s, 1.0), 0.0);
  EXPECT_TRUE(std::isinf(contamination_threshold(s, 0.0)));
  EXPECT_THROW(contamination_threshold(s, 1.5), ValidationError);
}

TEST(RatingCoherence, ClusteredByRatingIsDiagonal) {
  Rng rng(4);
  std::normal_distribution<double> noise(0, 0.01);
  Eigen::MatrixXd v(250, 3);
  std::vector<int> ratings(250);
  for (int i = 0; i < 250; ++i) {
    ratings[i] = i % 5 + 1;
    for (int j = 0; j < 3; ++j) v(i, j) = ratings[i] * 10.0 + noise(rng);
  }
  auto c = nn_rating_coherence(v, ratings, 10);
  for (int i = 0; i < 5; ++i) {
    EXPECT_NEAR(c.matrix(i, i), 1.0, 1e-12);
    EXPECT_NEAR(c.matrix.row(i).sum(), 1.0, 1e-9);
  }
}

TEST(RatingCoherence, IndependentVectorsMatchPriors) {
  Rng rng(6);
  std::normal_distribution<double> normal(0, 1);
  std::discrete_distribution<int> rating({0.1, 0.1, 0.2, 0.3, 0.3});
  const int n = 4000;
  Eigen::MatrixXd v(n, 5);
  std::vector<int> ratings(n);
  for (int i = 0; i < n; ++i) {
    ratings[i] = rating(rng) + 1;
    for (int j = 0; j < 5; ++j) v(i, j) = normal(rng);
  }
  auto c = nn_rating_coherence(v, ratings, 10);
  std::array<double, 5> prior{};
  for (int r : ratings) prior[r - 1] += 1.0 / n;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) EXPECT_NEAR(c.matrix(i, j), prior[j], 0.05);
}

TEST(RatingCoherence, EmptyRatingRowFlagged) {
  spamdet::testing::WarningCapture w;
  Eigen::MatrixXd v = Eigen::MatrixXd::Random(12, 2);
  std::vector<int> ratings(12, 4);
  ratings[0] = 1;
  auto c = nn_rating_coherence(v, ratings, 3);
  EXPECT_TRUE(c.empty_row[1]);
  EXPECT_FALSE(c.empty_row[0]);
  EXPECT_EQ(c.matrix.row(1).sum(), 0.0);
  EXPECT_THROW(nn_rating_coherence(v, ratings, 12), ValidationError);
}

TEST(MetricsTable, CsvAndJsonShape) {
  std::vector<MethodResult> rows{{"LOF", metrics({T, T, D, D}, {T, D, D, D}), 0.75}};
  auto csv = metrics_table_csv(rows);
  EXPECT_NE(csv.find("LOF,75.00,100.00,50.00,66.67,66.67,100.00,80.00,75.00"), std::string::npos);
  auto j = metrics_table_json(rows);
  EXPECT_DOUBLE_EQ(j[0]["deceptive"]["f1"].get<double>(), 80.0);
}
