#include "spamdet/forensics.h"

#include <algorithm>
#include <cmath>
#include <map>

#include "spamdet/error.h"

namespace spamdet {

RatingHistogram rating_histogram(const std::vector<int>& ratings) {
  if (ratings.empty()) throw ValidationError("rating histogram of no reviews");
  RatingHistogram h{};
  for (int r : ratings) {
    if (r < 1 || r > 5) throw ValidationError("rating " + std::to_string(r) + " outside 1..5");
    h[static_cast<std::size_t>(r - 1)] += 1.0;
  }
  for (auto& v : h) v /= static_cast<double>(ratings.size());
  return h;
}

RatingHistogram rating_histogram(const std::vector<const Review*>& reviews) {
  std::vector<int> ratings;
  ratings.reserve(reviews.size());
  for (const auto* r : reviews) ratings.push_back(r->rating);
  return rating_histogram(ratings);
}

namespace {

void check_histogram(const RatingHistogram& h) {
  double sum = 0.0;
  for (double v : h) {
    if (!(v >= 0.0)) throw ValidationError("histogram has a negative or NaN bin");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("histogram sums to " + std::to_string(sum) + ", not 1");
}

}  // namespace

double wasserstein_1d(const RatingHistogram& a, const RatingHistogram& b) {
  check_histogram(a);
  check_histogram(b);
  double ca = 0.0, cb = 0.0, w = 0.0;
  for (std::size_t i = 0; i + 1 < a.size(); ++i) {
    ca += a[i];
    cb += b[i];
    w += std::abs(ca - cb);
  }
  return w;
}

nlohmann::json MovieSuspicion::to_json() const {
  nlohmann::json j = {{"movie_id", movie_id},     {"score_bucket", score_bucket}, {"reviews", reviews},
                      {"mean_rating", mean_rating}, {"has_reference", has_reference}};
  j["wasserstein"] = has_reference ? nlohmann::json(wasserstein) : nlohmann::json(nullptr);
  return j;
}

std::vector<MovieSuspicion> spam_movie_scores(const Dataset& dataset, double granularity) {
  if (!(granularity > 0)) throw ValidationError("score granularity must be positive");
  std::map<std::string, std::vector<int>> ratings;
  for (const auto& r : dataset.reviews) ratings[r.movie_id].push_back(r.rating);

  struct Entry {
    MovieSuspicion s;
    RatingHistogram h;
  };
  std::map<long long, std::vector<Entry>> buckets;
  for (const auto& [movie_id, rs] : ratings) {
    const Movie& m = dataset.movies.at(movie_id);
    const long long key = std::llround(m.douban_score / granularity);
    Entry e;
    e.s.movie_id = movie_id;
    e.s.score_bucket = static_cast<double>(key) * granularity;
    e.s.reviews = rs.size();
    e.s.mean_rating = 0.0;
    for (int r : rs) e.s.mean_rating += r;
    e.s.mean_rating /= static_cast<double>(rs.size());
    e.h = rating_histogram(rs);
    buckets[key].push_back(std::move(e));
  }

  std::vector<MovieSuspicion> out;
  for (auto& [key, entries] : buckets) {
    RatingHistogram total{};
    for (const auto& e : entries)
      for (std::size_t i = 0; i < 5; ++i) total[i] += e.h[i];
    const double others = static_cast<double>(entries.size() - 1);
    for (auto& e : entries) {
      if (entries.size() >= 2) {
        RatingHistogram ref;
        for (std::size_t i = 0; i < 5; ++i) ref[i] = std::max(0.0, (total[i] - e.h[i]) / others);
        double sum = 0.0;
        for (double v : ref) sum += v;
        for (double& v : ref) v /= sum;  // absorb rounding from the subtraction
        e.s.has_reference = true;
        e.s.wasserstein = wasserstein_1d(e.h, ref);
      }
      out.push_back(std::move(e.s));
    }
  }
  std::sort(out.begin(), out.end(), [](const MovieSuspicion& a, const MovieSuspicion& b) {
    if (a.has_reference != b.has_reference) return a.has_reference;
    if (a.has_reference && a.wasserstein != b.wasserstein) return a.wasserstein > b.wasserstein;
    return a.movie_id < b.movie_id;
  });
  return out;
}

RatingBand rating_band(int rating) {
  if (rating < 1 || rating > 5) throw ValidationError("rating " + std::to_string(rating) + " outside 1..5");
  if (rating >= 4) return RatingBand::positive;
  if (rating == 3) return RatingBand::moderate;
  return RatingBand::negative;
}

std::string_view to_string(RatingBand band) {
  switch (band) {
    case RatingBand::positive: return "positive";
    case RatingBand::moderate: return "moderate";
    case RatingBand::negative: return "negative";
  }
  return "?";
}

nlohmann::json TemporalProfile::to_json() const {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& d : days) {
    nlohmann::json row = {{"day", d.day}};
    for (std::size_t b = 0; b < kBandCount; ++b) {
      const std::string name(to_string(static_cast<RatingBand>(b)));
      row[name] = d.share[b];
      row[name + "_spike"] = d.spike[b];
    }
    j.push_back(row);
  }
  return j;
}

TemporalProfile temporal_profile(const std::vector<Review>& reviews, std::int64_t bucket_seconds, double sigmas) {
  if (bucket_seconds <= 0) throw ValidationError("time bucket must be positive");
  std::map<std::int64_t, std::array<std::size_t, kBandCount>> counts;
  TemporalProfile p;
  for (const auto& r : reviews) {
    const auto day = static_cast<std::int64_t>(
        std::floor(static_cast<double>(r.timestamp) / static_cast<double>(bucket_seconds)));
    const auto band = static_cast<std::size_t>(rating_band(r.rating));
    ++counts[day][band];
    ++p.totals[band];
  }
  for (const auto& [day, c] : counts) {
    DailyShare d;
    d.day = day;
    for (std::size_t b = 0; b < kBandCount; ++b)
      d.share[b] = p.totals[b] ? static_cast<double>(c[b]) / static_cast<double>(p.totals[b]) : 0.0;
    p.days.push_back(d);
  }
  const double n = static_cast<double>(p.days.size());
  for (std::size_t b = 0; b < kBandCount && n > 0; ++b) {
    double mean = 0.0, sq = 0.0;
    for (const auto& d : p.days) {
      mean += d.share[b];
      sq += d.share[b] * d.share[b];
    }
    mean /= n;
    const double sd = std::sqrt(std::max(0.0, sq / n - mean * mean));
    if (sd <= 0.0) continue;
    for (auto& d : p.days) d.spike[b] = d.share[b] > mean + sigmas * sd;
  }
  return p;
}

nlohmann::json RankSuspicion::to_json() const {
  return {{"review_id", review_id},
          {"help_votes", help_votes},
          {"platform_rank", platform_rank},
          {"rank_by_votes", rank_by_votes},
          {"suspicion", suspicion}};
}

RankDiscordanceReport rank_discordance(const std::vector<Review>& reviews) {
  RankDiscordanceReport rep;
  for (const auto& r : reviews) {
    if (!r.help_votes || !r.platform_rank) {
      ++rep.skipped;
      continue;
    }
    rep.items.push_back({r.review_id, *r.help_votes, *r.platform_rank, 0, 0});
  }
  std::sort(rep.items.begin(), rep.items.end(), [](const RankSuspicion& a, const RankSuspicion& b) {
    return a.help_votes != b.help_votes ? a.help_votes > b.help_votes : a.review_id < b.review_id;
  });
  for (std::size_t i = 0; i < rep.items.size(); ++i) {
    rep.items[i].rank_by_votes = static_cast<std::int64_t>(i + 1);
    rep.items[i].suspicion = rep.items[i].platform_rank - rep.items[i].rank_by_votes;
  }
  std::stable_sort(rep.items.begin(), rep.items.end(),
                   [](const RankSuspicion& a, const RankSuspicion& b) { return a.suspicion > b.suspicion; });
  return rep;
}

AttitudeResult attitude_consistency(const std::vector<HistoryEntry>& history, const std::string& person_id, Credit role,
                                    int new_rating, double min_delta, std::size_t min_prior) {
  AttitudeResult res;
  for (const auto& h : history) {
    const bool credited = role == Credit::director
                              ? h.director_id == person_id
                              : std::find(h.actor_ids.begin(), h.actor_ids.end(), person_id) != h.actor_ids.end();
    if (credited) ++res.prior_ratings;
  }
  res.delta = std::abs(new_rating - avg_person_score(history, person_id, role));
  res.opposite = res.prior_ratings >= min_prior && res.delta >= min_delta;
  return res;
}

nlohmann::json AttitudeFlag::to_json() const {
  return {{"review_id", review_id},
          {"user_id", user_id},
          {"person_id", person_id},
          {"role", role == Credit::director ? "director" : "actor"},
          {"delta", result.delta},
          {"prior_ratings", result.prior_ratings}};
}

std::vector<AttitudeFlag> attitude_flags(const Dataset& dataset, double min_delta, std::size_t min_prior) {
  std::vector<AttitudeFlag> out;
  for (const auto& r : dataset.reviews) {
    const Movie& m = dataset.movie_of(r);
    const auto history = history_before(dataset, r.user_id, r.timestamp);
    auto check = [&](const std::string& person, Credit role) {
      auto res = attitude_consistency(history, person, role, r.rating, min_delta, min_prior);
      if (res.opposite) out.push_back({r.review_id, r.user_id, person, role, res});
    };
    check(m.director_id, Credit::director);
    for (const auto& a : m.actor_ids) check(a, Credit::actor);
  }
  return out;
}

}  // namespace spamdet
