#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "spamdet/corpus.h"
#include "spamdet/embed_sentence.h"

namespace spamdet {

struct SynthConfig {
  std::size_t n_users = 50;
  std::size_t genres_per_user = 4;
  std::size_t movies_per_genre = 150;
  std::size_t train_reviews_per_user = 320;  // before the cutoff, all truthful
  std::size_t test_reviews_per_user = 80;    // after the cutoff
  double spam_rate = 0.2;                    // contamination of the test window

  // Vocabulary: aspect pools are the standard feature words; fillers are rare.
  std::size_t filler_words = 3000;
  std::size_t sentiment_words_per_band = 8;
  int sentiment_bands = 3;  // 3: negative/moderate/positive pools, 5: one pool per rating
  double mean_length = 20.0;  // Poisson, floored at min_length
  std::size_t min_length = 5;
  double aspect_share = 0.35;     // probability a token is an aspect word
  double sentiment_share = 0.15;  // probability a token is a sentiment word

  double profile_concentration = 0.5;  // symmetric Dirichlet over the 4 aspects
  double rating_noise = 0.7;
  double director_affinity_sd = 0.5;
  std::size_t n_directors = 120;
  std::size_t n_actors = 400;
  std::size_t actors_per_movie = 3;

  // Mix of deceptive branches: attention swap only, swap plus opposite rating,
  // opposite rating only. Normalised internally.
  std::array<double, 3> spam_kind_weights{0.5, 0.5, 0.0};

  std::int64_t cutoff = 1600000000;
  std::uint64_t seed = 1;

  nlohmann::json to_json() const;
  // Unknown keys are rejected.
  static SynthConfig from_json(const nlohmann::json& j);
};

enum class SpamKind { none, attention_swap, swap_and_flip, rating_flip };
std::string_view to_string(SpamKind kind);

struct UserProfile {
  std::vector<std::string> genres;                // genres the user reviews
  std::map<std::string, Eigen::Vector4d> attention;  // per genre, sums to 1
  std::array<double, kRegionCount> region_mean{};    // mean rating per region
};

struct GeneratedReview {
  SpamKind kind = SpamKind::none;
  std::string profile_genre;  // genre whose attention profile produced the text
};

struct SynthCorpus {
  Dataset dataset;  // labels set on every review
  std::int64_t cutoff = 0;
  std::map<std::string, UserProfile> users;
  std::map<std::string, GeneratedReview> provenance;  // by review id
};

// Deterministic given the config. Warns when the config makes spam
// indistinguishable by construction.
SynthCorpus generate_corpus(const SynthConfig& config, const Catalogue& catalogue = Catalogue::standard());

// reviews.jsonl (labels stripped), movies.jsonl and labels.jsonl in `dir`.
void write_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir);

// labels.jsonl: one {"review_id", "label"} object per line.
std::map<std::string, Label> load_labels(const std::filesystem::path& path);

}  // namespace spamdet
