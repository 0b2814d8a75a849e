#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spamdet/conditions.h"
#include "spamdet/corpus.h"

namespace spamdet {

// Proportions of 1..5 star ratings.
using RatingHistogram = std::array<double, 5>;

RatingHistogram rating_histogram(const std::vector<int>& ratings);
RatingHistogram rating_histogram(const std::vector<const Review*>& reviews);

// Earth mover's distance between two star histograms with unit spacing.
// Throws ValidationError unless both are nonnegative and sum to 1 (+-1e-9).
double wasserstein_1d(const RatingHistogram& a, const RatingHistogram& b);

struct MovieSuspicion {
  std::string movie_id;
  double score_bucket = 0.0;
  std::size_t reviews = 0;
  double mean_rating = 0.0;
  bool has_reference = false;  // another reviewed movie shares the bucket
  double wasserstein = 0.0;    // to the mean histogram of the rest of the bucket

  nlohmann::json to_json() const;
};

// One entry per reviewed movie. Movies with a reference come first, by
// descending distance; the rest follow by id.
std::vector<MovieSuspicion> spam_movie_scores(const Dataset& dataset, double granularity = 0.1);

enum class RatingBand { positive, moderate, negative };
inline constexpr std::size_t kBandCount = 3;
RatingBand rating_band(int rating);  // 4-5, 3, 1-2
std::string_view to_string(RatingBand band);

struct DailyShare {
  std::int64_t day = 0;  // timestamp / bucket_seconds, floored
  std::array<double, kBandCount> share{};
  std::array<bool, kBandCount> spike{};
};

struct TemporalProfile {
  std::vector<DailyShare> days;  // days with at least one review, ascending
  std::array<std::size_t, kBandCount> totals{};

  nlohmann::json to_json() const;
};

// Each band's share of its own total per day. A day spikes for a band when its
// share exceeds mean + sigmas * sd of that band's shares over all listed days.
TemporalProfile temporal_profile(const std::vector<Review>& reviews, std::int64_t bucket_seconds = 86400,
                                 double sigmas = 3.0);

struct RankSuspicion {
  std::string review_id;
  std::int64_t help_votes = 0;
  std::int64_t platform_rank = 0;
  std::int64_t rank_by_votes = 0;  // 1 = most votes, ties by review id
  std::int64_t suspicion = 0;      // platform_rank - rank_by_votes

  nlohmann::json to_json() const;
};

struct RankDiscordanceReport {
  std::vector<RankSuspicion> items;  // descending suspicion
  std::size_t skipped = 0;           // reviews lacking votes or platform rank
};

RankDiscordanceReport rank_discordance(const std::vector<Review>& reviews);

struct AttitudeResult {
  bool opposite = false;
  double delta = 0.0;
  std::size_t prior_ratings = 0;  // earlier ratings of movies crediting the person
};

AttitudeResult attitude_consistency(const std::vector<HistoryEntry>& history, const std::string& person_id, Credit role,
                                    int new_rating, double min_delta = 3.0, std::size_t min_prior = 2);

struct AttitudeFlag {
  std::string review_id;
  std::string user_id;
  std::string person_id;
  Credit role = Credit::director;
  AttitudeResult result;

  nlohmann::json to_json() const;
};

// Every review whose rating contradicts the user's earlier ratings of the
// movie's director or one of its actors.
std::vector<AttitudeFlag> attitude_flags(const Dataset& dataset, double min_delta = 3.0, std::size_t min_prior = 2);

}  // namespace spamdet
