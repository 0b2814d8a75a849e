#include "spamdet/eval.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "spamdet/error.h"
#include "spamdet/log.h"

namespace spamdet {

double f1_score(double precision, double recall) {
  return precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

namespace {

ClassMetrics class_metrics(const ConfusionCounts& c) {
  ClassMetrics m;
  m.counts = c;
  m.precision = c.tp + c.fp ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
  m.recall = c.tp + c.fn ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
  m.f1 = f1_score(m.precision, m.recall);
  return m;
}

nlohmann::json class_json(const ClassMetrics& m) {
  return {{"precision", m.precision},
          {"recall", m.recall},
          {"f1", m.f1},
          {"tp", m.counts.tp},
          {"fp", m.counts.fp},
          {"tn", m.counts.tn},
          {"fn", m.counts.fn}};
}

}  // namespace

nlohmann::json Metrics::to_json() const {
  return {{"n", n}, {"accuracy", accuracy}, {"truthful", class_json(truthful)}, {"deceptive", class_json(deceptive)}};
}

Metrics metrics(const std::vector<Label>& labels, const std::vector<Label>& predictions) {
  if (labels.size() != predictions.size())
    throw ValidationError("labels and predictions differ in length (" + std::to_string(labels.size()) + " vs " +
                          std::to_string(predictions.size()) + ")");
  ConfusionCounts dec;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool actual = labels[i] == Label::deceptive, flagged = predictions[i] == Label::deceptive;
    if (actual && flagged) ++dec.tp;
    else if (!actual && flagged) ++dec.fp;
    else if (actual) ++dec.fn;
    else ++dec.tn;
  }
  Metrics m;
  m.n = labels.size();
  m.deceptive = class_metrics(dec);
  m.truthful = class_metrics({dec.tn, dec.fn, dec.tp, dec.fp});
  m.accuracy = m.n ? static_cast<double>(dec.tp + dec.tn) / static_cast<double>(m.n) : 0.0;
  return m;
}

nlohmann::json SweepResult::to_json() const {
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& p : roc) curve.push_back({{"threshold", p.threshold}, {"fpr", p.fpr}, {"tpr", p.tpr}});
  return {{"auc", auc ? nlohmann::json(*auc) : nlohmann::json(nullptr)},
          {"best_threshold", best_threshold},
          {"best_f1", best_f1},
          {"roc", curve}};
}

SweepResult threshold_sweep(const Eigen::VectorXd& scores, const std::vector<Label>& labels, std::size_t n_points) {
  if (static_cast<std::size_t>(scores.size()) != labels.size())
    throw ValidationError("scores and labels differ in length");
  const std::size_t n = labels.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores(static_cast<Eigen::Index>(a)) > scores(static_cast<Eigen::Index>(b));
  });
  const auto pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), Label::deceptive));
  const std::size_t neg = n - pos;

  SweepResult res;
  res.roc.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  double auc = 0.0;
  for (std::size_t i = 0; i < n;) {
    const double s = scores(static_cast<Eigen::Index>(order[i]));
    for (; i < n && scores(static_cast<Eigen::Index>(order[i])) == s; ++i)
      (labels[order[i]] == Label::deceptive ? tp : fp)++;
    RocPoint p{s, neg ? static_cast<double>(fp) / static_cast<double>(neg) : 0.0,
               pos ? static_cast<double>(tp) / static_cast<double>(pos) : 0.0};
    const RocPoint& prev = res.roc.back();
    auc += (p.fpr - prev.fpr) * (p.tpr + prev.tpr) / 2.0;
    res.roc.push_back(p);
    const double f1 = f1_score(static_cast<double>(tp) / static_cast<double>(tp + fp),
                               pos ? static_cast<double>(tp) / static_cast<double>(pos) : 0.0);
    if (f1 > res.best_f1) {
      res.best_f1 = f1;
      res.best_threshold = s;
    }
  }
  if (pos && neg) res.auc = auc;
  else warn("threshold sweep over a single class; AUC is undefined");

  if (n_points > 1 && res.roc.size() > n_points) {
    std::vector<RocPoint> thin;
    const double step = static_cast<double>(res.roc.size() - 1) / static_cast<double>(n_points - 1);
    for (std::size_t i = 0; i < n_points; ++i)
      thin.push_back(res.roc[static_cast<std::size_t>(std::llround(static_cast<double>(i) * step))]);
    res.roc = std::move(thin);
  }
  return res;
}

double contamination_threshold(const Eigen::VectorXd& scores, double contamination) {
  if (!(contamination >= 0.0 && contamination <= 1.0)) throw ValidationError("contamination must be in [0, 1]");
  if (scores.size() == 0) throw ValidationError("no scores to threshold");
  const auto flagged = static_cast<std::size_t>(std::ceil(contamination * static_cast<double>(scores.size()) - 1e-9));
  if (flagged == 0) return std::numeric_limits<double>::infinity();
  std::vector<double> sorted(scores.data(), scores.data() + scores.size());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(flagged - 1), sorted.end(),
                   std::greater<>());
  return sorted[flagged - 1];
}

nlohmann::json RatingCoherence::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < 5; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < 5; ++j) row.push_back(matrix(i, j));
    rows.push_back(row);
  }
  nlohmann::json empty = nlohmann::json::array();
  for (int i = 0; i < 5; ++i)
    if (empty_row[static_cast<std::size_t>(i)]) empty.push_back(i + 1);
  return {{"matrix", rows}, {"empty_ratings", empty}};
}

RatingCoherence nn_rating_coherence(const Eigen::MatrixXd& vectors, const std::vector<int>& ratings, std::size_t k) {
  const auto n = static_cast<std::size_t>(vectors.rows());
  if (ratings.size() != n) throw ValidationError("vectors and ratings differ in length");
  if (k == 0 || n < k + 1) throw ValidationError("rating coherence needs at least k+1 vectors");
  for (int r : ratings)
    if (r < 1 || r > 5) throw ValidationError("rating " + std::to_string(r) + " outside 1..5");

  RatingCoherence out;
  std::array<std::size_t, 5> count{};
  const Eigen::VectorXd sq = vectors.rowwise().squaredNorm();
  constexpr Eigen::Index kBlock = 256;
  std::vector<std::pair<double, std::size_t>> row(n);
  for (Eigen::Index start = 0; start < vectors.rows(); start += kBlock) {
    const Eigen::Index rows = std::min(kBlock, vectors.rows() - start);
    // Squared distances for a block of queries.
    Eigen::MatrixXd d = -2.0 * vectors.middleRows(start, rows) * vectors.transpose();
    d.colwise() += sq.segment(start, rows);
    d.rowwise() += sq.transpose();
    for (Eigen::Index q = 0; q < rows; ++q) {
      const auto self = static_cast<std::size_t>(start + q);
      std::size_t m = 0;
      for (std::size_t j = 0; j < n; ++j)
        if (j != self) row[m++] = {d(q, static_cast<Eigen::Index>(j)), j};
      std::partial_sort(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k), row.begin() + static_cast<std::ptrdiff_t>(m));
      const int ri = ratings[self] - 1;
      for (std::size_t t = 0; t < k; ++t) out.matrix(ri, ratings[row[t].second] - 1) += 1.0 / static_cast<double>(k);
      ++count[static_cast<std::size_t>(ri)];
    }
  }
  for (int i = 0; i < 5; ++i) {
    if (count[static_cast<std::size_t>(i)]) {
      out.matrix.row(i) /= static_cast<double>(count[static_cast<std::size_t>(i)]);
    } else {
      out.empty_row[static_cast<std::size_t>(i)] = true;
      warn("no reviews rated " + std::to_string(i + 1) + "; coherence row left at zero");
    }
  }
  return out;
}

namespace {

double pct(double v) { return std::round(v * 1e6) / 1e4; }

}  // namespace

nlohmann::json metrics_table_json(const std::vector<MethodResult>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    auto cls = [](const ClassMetrics& c) {
      return nlohmann::json{{"precision", pct(c.precision)}, {"recall", pct(c.recall)}, {"f1", pct(c.f1)}};
    };
    out.push_back({{"method", r.method},
                   {"accuracy", pct(r.metrics.accuracy)},
                   {"truthful", cls(r.metrics.truthful)},
                   {"deceptive", cls(r.metrics.deceptive)},
                   {"auc", r.auc ? nlohmann::json(pct(*r.auc)) : nlohmann::json(nullptr)},
                   {"n", r.metrics.n}});
  }
  return out;
}

std::string metrics_table_csv(const std::vector<MethodResult>& rows) {
  std::ostringstream out;
  out << "method,accuracy,truthful_precision,truthful_recall,truthful_f1,deceptive_precision,deceptive_recall,"
         "deceptive_f1,auc\n";
  out << std::fixed << std::setprecision(2);
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    out << r.method << ',' << 100 * m.accuracy << ',' << 100 * m.truthful.precision << ',' << 100 * m.truthful.recall
        << ',' << 100 * m.truthful.f1 << ',' << 100 * m.deceptive.precision << ',' << 100 * m.deceptive.recall << ','
        << 100 * m.deceptive.f1 << ',';
    if (r.auc) out << 100 * *r.auc;
    out << '\n';
  }
  return out.str();
}

}  // namespace spamdet
