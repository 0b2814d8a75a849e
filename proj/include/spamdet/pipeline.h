#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "spamdet/adcgan.h"
#include "spamdet/baselines.h"
#include "spamdet/corpus.h"
#include "spamdet/embed_sentence.h"
#include "spamdet/embed_word.h"
#include "spamdet/synth.h"
#include "spamdet/text.h"

namespace spamdet {

struct EmbedConfig {
  TokenizeMode tokenize = TokenizeMode::whitespace;
  int min_count = 5;
  SkipGramConfig skipgram;
  bool expand_features = true;
  ExpansionConfig expansion;
  SifConfig sif;
  bool use_attention = true;  // false gives plain SIF weighting
};

struct DetectionConfig {
  std::int64_t cutoff = 1600000000;  // reviews before it train the per-user models
  double contamination = 0.2;       // share of pooled test scores flagged deceptive
  std::size_t min_history = 20;     // users with fewer training reviews are not scored
};

struct ForensicsConfig {
  double score_granularity = 0.1;
  double spike_sigmas = 3.0;
  double opposite_delta = 3.0;
  std::size_t min_prior_ratings = 2;
};

struct PipelineConfig {
  std::uint64_t seed = 1;  // every stage seed derives from this
  std::string corpus_dir = "corpus";
  std::string work_dir = "work";
  std::size_t threads = 0;  // 0: one per hardware thread
  SynthConfig synth;
  EmbedConfig embed;
  AdcganConfig gan;
  std::size_t lof_k = 10;
  IForestConfig iforest;
  VaeConfig vae;
  DetectionConfig detection;
  ForensicsConfig forensics;
  std::size_t coherence_k = 10;

  nlohmann::json to_json() const;
  // Unknown keys are rejected and "seed" is required.
  static PipelineConfig from_json(const nlohmann::json& j);
  std::uint64_t hash() const;
  // Pushes the top-level seed into every stage config.
  void derive_stage_seeds();
};

struct EmbeddingModel {
  Vocabulary vocab;
  WordEmbeddings words;
  FeatureWordList features;
  SifConfig sif;  // resolved against vocab
};

std::vector<std::vector<std::string>> tokenize_reviews(const std::vector<Review>& reviews, TokenizeMode mode);

EmbeddingModel train_embedding(const std::vector<Review>& reviews, const EmbedConfig& config);

struct ReviewVectors {
  std::vector<std::string> review_ids;
  Eigen::MatrixXd vectors;                        // common component removed
  std::map<std::string, Eigen::VectorXd> common;  // removed direction, per user
};

// Each user's common component is taken from that user's reviews before the
// cutoff and removed from all of the user's reviews, so test-time vectors
// never depend on test text. Users with fewer than two usable training
// reviews fall back to the component of all training reviews.
// Reviews with no in-vocabulary token get a zero vector (with a warning).
ReviewVectors embed_reviews(const std::vector<Review>& reviews, const EmbeddingModel& model, TokenizeMode mode,
                            bool use_attention, std::int64_t cutoff);

// Row indices of one user's reviews on each side of the cutoff.
struct UserRows {
  std::string user_id;
  std::vector<std::size_t> train, test;
};
std::vector<UserRows> split_rows(const std::vector<Review>& reviews, std::int64_t cutoff);

enum class Method { adcgan, lof, iforest, vae };
std::string_view to_string(Method m);
Method parse_method(std::string_view s);

// Users are processed in parallel; results do not depend on the thread count.
// Users with fewer than detection.min_history training rows are skipped.
std::map<std::string, AdcganModel> train_user_models(const std::vector<UserRows>& users, const Eigen::MatrixXd& vectors,
                                                     const Eigen::MatrixXd& conditions, const PipelineConfig& config);

// Scores of the test rows of every user with a model, NaN elsewhere.
Eigen::VectorXd score_with_models(std::map<std::string, AdcganModel>& models, const std::vector<UserRows>& users,
                                  const Eigen::MatrixXd& vectors, const Eigen::MatrixXd& conditions);

// Scores of the test rows of every user, NaN for rows left unscored.
Eigen::VectorXd score_test_rows(Method method, const std::vector<UserRows>& users, const Eigen::MatrixXd& vectors,
                                const Eigen::MatrixXd& conditions, const PipelineConfig& config);

// Features the baselines see: [standardised vector | condition], with the
// vector statistics taken from the user's training rows.
Eigen::MatrixXd baseline_features(const Eigen::MatrixXd& vectors, const Eigen::MatrixXd& conditions,
                                  const std::vector<std::size_t>& train, const std::vector<std::size_t>& rows);

// Runs f(i) for i in [0, n) on `threads` workers (0: hardware concurrency).
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& f);

}  // namespace spamdet
