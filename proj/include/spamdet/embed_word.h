#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spamdet/text.h"

namespace spamdet {

struct SkipGramConfig {
  std::size_t dim = 100;
  int max_window = 5;  // per-position window drawn from U{1..max_window}
  int negatives = 5;
  int epochs = 1;
  double learning_rate = 0.025;  // decays linearly to ~0 over training
  std::uint64_t seed = 1;
};

// Input-side word vectors, one row per vocabulary id.
struct WordEmbeddings {
  Eigen::MatrixXd vectors;

  std::size_t size() const { return static_cast<std::size_t>(vectors.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(vectors.cols()); }
  Eigen::VectorXd row(TokenId id) const { return vectors.row(id).transpose(); }

  // Header (|V|, d) followed by rows aligned with vocabulary ids.
  void save(const std::filesystem::path& path) const;
  static WordEmbeddings load(const std::filesystem::path& path);
};

struct SkipGramStats {
  // Mean negative-sampling loss per (center, context) pair, one per epoch.
  std::vector<double> epoch_loss;
};

// Skip-gram with negative sampling over sentences of vocabulary ids.
// Negatives are drawn from the unigram distribution raised to 3/4.
// Single-threaded and deterministic for a fixed seed.
WordEmbeddings train_skipgram(const std::vector<std::vector<TokenId>>& corpus, const Vocabulary& vocab,
                              const SkipGramConfig& config, SkipGramStats* stats = nullptr);

// Throws ValidationError if either vector is zero or the sizes differ.
double cosine(std::span<const double> u, std::span<const double> v);
double cosine(const Eigen::VectorXd& u, const Eigen::VectorXd& v);

// The k tokens most similar to `token` by cosine, excluding the token itself.
// Ties are broken by smaller token id.
std::vector<std::string> nearest_words(const WordEmbeddings& emb, const Vocabulary& vocab, const std::string& token,
                                       std::size_t k);

}  // namespace spamdet
