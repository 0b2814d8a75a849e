#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace spamdet {

enum class TokenizeMode {
  whitespace,     // split on whitespace and ASCII punctuation, lowercase ASCII
  unigram_char,   // one token per non-ASCII code point; ASCII alnum runs stay whole
  pre_segmented,  // text already segmented by spaces; taken verbatim
};

TokenizeMode parse_tokenize_mode(std::string_view s);
std::string_view to_string(TokenizeMode mode);

std::vector<std::string> tokenize(std::string_view text, TokenizeMode mode);

using TokenId = std::int32_t;

// Token <-> id map with unigram counts over the kept tokens. Ids are dense and
// ordered by descending count, ties by token.
class Vocabulary {
 public:
  Vocabulary() = default;

  std::size_t size() const { return tokens_.size(); }
  bool empty() const { return tokens_.empty(); }
  std::optional<TokenId> id(std::string_view token) const;
  const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::int64_t count(TokenId id) const { return counts_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::int64_t>& counts() const { return counts_; }
  std::int64_t total_tokens() const { return total_; }
  int min_count() const { return min_count_; }

  // Unigram probability p(w) = count / total over kept tokens.
  double probability(TokenId id) const;

  // Maps a token sequence to ids, dropping out-of-vocabulary tokens.
  std::vector<TokenId> encode(const std::vector<std::string>& tokens) const;

  nlohmann::json to_json() const;
  static Vocabulary from_json(const nlohmann::json& j);

  friend Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus, int min_count);

 private:
  std::vector<std::string> tokens_;
  std::vector<std::int64_t> counts_;
  std::unordered_map<std::string, TokenId> index_;
  std::int64_t total_ = 0;
  int min_count_ = 1;
};

// Throws ValidationError on an empty corpus (or nothing surviving min_count)
// and on min_count < 1.
Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus, int min_count = 5);

}  // namespace spamdet
