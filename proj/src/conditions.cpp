#include "spamdet/conditions.h"

#include <algorithm>
#include <set>

#include "spamdet/error.h"
#include "spamdet/log.h"

namespace spamdet {

namespace {

bool credits(const HistoryEntry& h, const std::string& person, Credit role) {
  if (role == Credit::director) return h.director_id == person;
  return std::find(h.actor_ids.begin(), h.actor_ids.end(), person) != h.actor_ids.end();
}

}  // namespace

double avg_person_score(const std::vector<HistoryEntry>& history, const std::vector<std::string>& person_ids,
                        Credit role) {
  if (history.empty()) return 3.0;
  double sum = 0.0, all = 0.0;
  std::size_t n = 0;
  for (const auto& h : history) {
    all += h.rating;
    if (std::any_of(person_ids.begin(), person_ids.end(), [&](const auto& p) { return credits(h, p, role); })) {
      sum += h.rating;
      ++n;
    }
  }
  return n ? sum / static_cast<double>(n) : all / static_cast<double>(history.size());
}

double avg_person_score(const std::vector<HistoryEntry>& history, const std::string& person_id, Credit role) {
  return avg_person_score(history, std::vector<std::string>{person_id}, role);
}

Eigen::VectorXd encode_condition(const Movie& movie, int user_rating, const std::vector<HistoryEntry>& history,
                                 const Catalogue& catalogue) {
  if (user_rating < 1 || user_rating > 5) throw ValidationError("rating " + std::to_string(user_rating) + " outside 1..5");
  if (!(movie.douban_score >= 0.0 && movie.douban_score <= 10.0))
    throw ValidationError("movie " + movie.movie_id + " has score outside 0..10");
  Eigen::VectorXd c = Eigen::VectorXd::Zero(kConditionDim);
  c(cond_slot::movie_score) = movie.douban_score / 10.0;
  c(cond_slot::user_rating) = user_rating / 5.0;
  auto region = catalogue.region_index(movie.region);
  if (!region) throw ValidationError("movie " + movie.movie_id + " has unknown region '" + movie.region + "'");
  c(cond_slot::region + static_cast<Eigen::Index>(*region)) = 1.0;
  for (const auto& g : movie.genres) {
    auto gi = catalogue.genre_index(g);
    if (!gi) throw ValidationError("movie " + movie.movie_id + " has unknown genre '" + g + "'");
    c(cond_slot::genre + static_cast<Eigen::Index>(*gi)) = 1.0;
  }
  c(cond_slot::director) = avg_person_score(history, movie.director_id, Credit::director) / 5.0;
  c(cond_slot::actor) = avg_person_score(history, movie.actor_ids, Credit::actor) / 5.0;
  return c;
}

std::vector<HistoryEntry> history_before(const Dataset& dataset, const std::string& user_id, std::int64_t timestamp) {
  std::vector<HistoryEntry> out;
  auto it = dataset.by_user.find(user_id);
  if (it == dataset.by_user.end()) return out;
  for (std::size_t idx : it->second) {
    const Review& r = dataset.reviews[idx];
    if (r.timestamp >= timestamp) continue;
    const Movie& m = dataset.movie_of(r);
    out.push_back({r.rating, m.director_id, m.actor_ids});
  }
  return out;
}

Eigen::MatrixXd encode_conditions(const Dataset& dataset, const std::vector<Review>& reviews,
                                  const Catalogue& catalogue) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(reviews.size()), static_cast<Eigen::Index>(kConditionDim));
  for (std::size_t i = 0; i < reviews.size(); ++i) {
    const Review& r = reviews[i];
    out.row(static_cast<Eigen::Index>(i)) =
        encode_condition(dataset.movie_of(r), r.rating, history_before(dataset, r.user_id, r.timestamp), catalogue)
            .transpose();
  }
  return out;
}

std::size_t count_distinct_rows(const Eigen::MatrixXd& rows) {
  std::set<std::vector<double>> seen;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    std::vector<double> r(static_cast<std::size_t>(rows.cols()));
    for (Eigen::Index j = 0; j < rows.cols(); ++j) r[static_cast<std::size_t>(j)] = rows(i, j);
    seen.insert(std::move(r));
  }
  return seen.size();
}

ConditionSampler::ConditionSampler(Eigen::MatrixXd train_conditions, int max_redraws)
    : conditions_(std::move(train_conditions)), max_redraws_(max_redraws) {
  if (conditions_.rows() == 0) throw ValidationError("cannot resample from an empty training set");
  distinct_ = count_distinct_rows(conditions_);
  if (distinct_ == 1) warn("training set has a single distinct condition; mismatched pairs are impossible");
}

ResampleResult ConditionSampler::sample(std::size_t batch_size, Rng& rng) const {
  std::uniform_int_distribution<std::size_t> pick(0, static_cast<std::size_t>(conditions_.rows()) - 1);
  ResampleResult out;
  out.indices.resize(batch_size);
  for (auto& i : out.indices) i = pick(rng);
  return out;
}

ResampleResult ConditionSampler::sample_mismatched(const Eigen::MatrixXd& cg_batch, Rng& rng) const {
  if (cg_batch.cols() != conditions_.cols()) throw ValidationError("condition batch has wrong width");
  std::uniform_int_distribution<std::size_t> pick(0, static_cast<std::size_t>(conditions_.rows()) - 1);
  ResampleResult out;
  out.indices.resize(static_cast<std::size_t>(cg_batch.rows()));
  for (Eigen::Index b = 0; b < cg_batch.rows(); ++b) {
    std::size_t idx = pick(rng);
    bool same = conditions_.row(static_cast<Eigen::Index>(idx)) == cg_batch.row(b);
    for (int redraw = 0; same && redraw < max_redraws_; ++redraw) {
      idx = pick(rng);
      same = conditions_.row(static_cast<Eigen::Index>(idx)) == cg_batch.row(b);
    }
    if (same) ++out.collisions;
    out.indices[static_cast<std::size_t>(b)] = idx;
  }
  return out;
}

ResampleResult resample_conditions(const Eigen::MatrixXd& train_conditions, const Eigen::MatrixXd& cg_batch, Rng& rng) {
  return ConditionSampler(train_conditions).sample_mismatched(cg_batch, rng);
}

}  // namespace spamdet
