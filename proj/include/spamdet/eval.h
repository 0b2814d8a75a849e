#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "spamdet/corpus.h"

namespace spamdet {

// 2PR / (P + R), 0 when both are 0. Works on fractions or percentages.
double f1_score(double precision, double recall);

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

struct ClassMetrics {
  ConfusionCounts counts;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct Metrics {
  std::size_t n = 0;
  double accuracy = 0.0;
  ClassMetrics truthful, deceptive;

  nlohmann::json to_json() const;
};

Metrics metrics(const std::vector<Label>& labels, const std::vector<Label>& predictions);

struct RocPoint {
  double threshold = 0.0;  // flag score >= threshold
  double fpr = 0.0;
  double tpr = 0.0;
};

struct SweepResult {
  std::vector<RocPoint> roc;  // from (0,0) to (1,1), one point per distinct score
  std::optional<double> auc;  // empty when only one class is present
  double best_threshold = 0.0;
  double best_f1 = 0.0;  // deceptive-class F1 at best_threshold

  nlohmann::json to_json() const;
};

// Deceptive is the positive class; higher scores are more suspicious. Equal
// scores move the curve in a single diagonal segment. n_points > 1 thins the
// returned curve (AUC always uses the full curve).
SweepResult threshold_sweep(const Eigen::VectorXd& scores, const std::vector<Label>& labels, std::size_t n_points = 0);

// Threshold that flags the top `contamination` fraction of scores (ties may
// flag more). Returns +inf for contamination 0.
double contamination_threshold(const Eigen::VectorXd& scores, double contamination);

struct RatingCoherence {
  Eigen::Matrix<double, 5, 5> matrix = Eigen::Matrix<double, 5, 5>::Zero();
  std::array<bool, 5> empty_row{};  // no reviews with that rating

  nlohmann::json to_json() const;
};

// Row i: average share of each rating among the k nearest neighbours
// (Euclidean, self excluded) of reviews rated i+1.
RatingCoherence nn_rating_coherence(const Eigen::MatrixXd& vectors, const std::vector<int>& ratings,
                                    std::size_t k = 10);

struct MethodResult {
  std::string method;
  Metrics metrics;
  std::optional<double> auc;
};

// Rows are methods; columns accuracy and per-class precision / recall / F1,
// all in percent.
nlohmann::json metrics_table_json(const std::vector<MethodResult>& rows);
std::string metrics_table_csv(const std::vector<MethodResult>& rows);

}  // namespace spamdet
