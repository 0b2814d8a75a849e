#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace spamdet {

enum class Label { truthful, deceptive };

std::string_view to_string(Label label);
Label parse_label(std::string_view s);

struct Review {
  std::string review_id;
  std::string user_id;
  std::string movie_id;
  int rating = 0;  // 1..5 stars
  std::string text;
  std::int64_t timestamp = 0;  // UTC seconds
  std::optional<std::int64_t> help_votes;
  std::optional<std::int64_t> platform_rank;
  std::optional<Label> label;

  bool operator==(const Review&) const = default;
};

struct Movie {
  std::string movie_id;
  double douban_score = 0.0;  // 0..10
  std::vector<std::string> genres;
  std::string region;
  std::string director_id;
  std::vector<std::string> actor_ids;
  std::int64_t release_date = 0;

  bool operator==(const Movie&) const = default;
};

inline constexpr std::size_t kGenreCount = 20;
inline constexpr std::size_t kRegionCount = 4;

// Fixed genre catalogue and region buckets. Both are configuration; the
// dimensions are not.
struct Catalogue {
  std::array<std::string, kGenreCount> genres;
  std::array<std::string, kRegionCount> regions;

  static Catalogue standard();
  std::optional<std::size_t> genre_index(std::string_view genre) const;
  std::optional<std::size_t> region_index(std::string_view region) const;
  // Stable across runs; stored in model files so scoring refuses a
  // catalogue it was not trained with.
  std::uint64_t hash() const;

  nlohmann::json to_json() const;
  static Catalogue from_json(const nlohmann::json& j);
};

struct Dataset {
  std::vector<Review> reviews;
  std::map<std::string, Movie> movies;
  // user_id -> indices into `reviews`, in file order.
  std::map<std::string, std::vector<std::size_t>> by_user;

  void rebuild_index();
  const Movie& movie_of(const Review& r) const;
  std::vector<const Review*> reviews_of(const std::string& user_id) const;
};

enum class SchemaMode { reviews, movies };

nlohmann::json review_to_json(const Review& r);
Review review_from_json(const nlohmann::json& j);
nlohmann::json movie_to_json(const Movie& m);
Movie movie_from_json(const nlohmann::json& j);

// Record-level invariants. Throws ValidationError.
void validate_review(const Review& r);
void validate_movie(const Movie& m, const Catalogue& catalogue);

// Parses a line-delimited JSON file. Only the part of the Dataset selected by
// `mode` is filled. Malformed lines raise ParseError with the line number.
Dataset load_corpus(const std::filesystem::path& path, SchemaMode mode,
                    const Catalogue& catalogue = Catalogue::standard());
Dataset load_corpus(std::istream& in, SchemaMode mode,
                    const Catalogue& catalogue = Catalogue::standard());

// Combines a reviews fragment and a movies fragment and checks referential
// integrity (every review's movie resolves, review ids unique).
Dataset merge_fragments(Dataset reviews, Dataset movies);

void save_reviews(const std::filesystem::path& path, const std::vector<Review>& reviews);
void save_movies(const std::filesystem::path& path, const std::map<std::string, Movie>& movies);
void write_reviews(std::ostream& out, const std::vector<Review>& reviews);
void write_movies(std::ostream& out, const std::map<std::string, Movie>& movies);

struct ValidationReport {
  std::size_t reviews = 0;
  std::size_t users = 0;
  std::size_t movies = 0;
  std::size_t labeled = 0;
  std::size_t deceptive = 0;

  nlohmann::json to_json() const;
};

ValidationReport validation_report(const Dataset& dataset);

struct TimeSplit {
  std::vector<Review> train;  // timestamp < cutoff
  std::vector<Review> test;
  bool empty_train = false;   // model cannot be trained for this user
};

// Historical/recent partition of one user's reviews. Throws ValidationError
// for an unknown user.
TimeSplit split_by_time(const Dataset& dataset, const std::string& user_id, std::int64_t cutoff);

}  // namespace spamdet
