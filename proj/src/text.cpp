#include "spamdet/text.h"

#include <algorithm>
#include <cctype>
#include <map>

#include "spamdet/error.h"

namespace spamdet {

namespace {

bool is_ascii_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

// Decodes one UTF-8 sequence starting at s[i]. Invalid bytes decode as
// themselves so tokenization never throws.
char32_t next_code_point(std::string_view s, std::size_t& i) {
  auto b0 = static_cast<unsigned char>(s[i]);
  std::size_t len = b0 < 0x80 ? 1 : (b0 >> 5) == 0x6 ? 2 : (b0 >> 4) == 0xe ? 3 : (b0 >> 3) == 0x1e ? 4 : 1;
  if (i + len > s.size()) len = 1;
  char32_t cp = len == 1 ? b0 : len == 2 ? (b0 & 0x1f) : len == 3 ? (b0 & 0x0f) : (b0 & 0x07);
  for (std::size_t k = 1; k < len; ++k) {
    auto b = static_cast<unsigned char>(s[i + k]);
    if ((b & 0xc0) != 0x80) {
      len = 1;
      cp = b0;
      break;
    }
    cp = (cp << 6) | (b & 0x3f);
  }
  i += len;
  return cp;
}

// CJK symbols/punctuation, fullwidth ASCII punctuation, general punctuation.
bool is_wide_punct_or_space(char32_t cp) {
  if (cp >= 0x2000 && cp <= 0x206f) return true;
  if (cp >= 0x3000 && cp <= 0x303f) return true;
  if (cp >= 0xff01 && cp <= 0xff0f) return true;
  if (cp >= 0xff1a && cp <= 0xff20) return true;
  if (cp >= 0xff3b && cp <= 0xff40) return true;
  if (cp >= 0xff5b && cp <= 0xff65) return true;
  return false;
}

std::vector<std::string> tokenize_whitespace(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (is_ascii_space(c) || (c < 0x80 && std::ispunct(c))) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::vector<std::string> tokenize_unigram_char(std::string_view text) {
  std::vector<std::string> out;
  std::string ascii_run;
  auto flush = [&] {
    if (!ascii_run.empty()) out.push_back(std::move(ascii_run));
    ascii_run.clear();
  };
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t start = i;
    char32_t cp = next_code_point(text, i);
    if (cp < 0x80) {
      auto c = static_cast<unsigned char>(cp);
      if (std::isalnum(c)) {
        ascii_run.push_back(static_cast<char>(std::tolower(c)));
      } else {
        flush();
      }
      continue;
    }
    flush();
    if (!is_wide_punct_or_space(cp)) out.emplace_back(text.substr(start, i - start));
  }
  flush();
  return out;
}

std::vector<std::string> tokenize_pre_segmented(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_ascii_space(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_ascii_space(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace

TokenizeMode parse_tokenize_mode(std::string_view s) {
  if (s == "whitespace") return TokenizeMode::whitespace;
  if (s == "unigram-char") return TokenizeMode::unigram_char;
  if (s == "pre-segmented") return TokenizeMode::pre_segmented;
  throw ValidationError("unknown tokenize mode '" + std::string(s) + "'");
}

std::string_view to_string(TokenizeMode mode) {
  switch (mode) {
    case TokenizeMode::whitespace: return "whitespace";
    case TokenizeMode::unigram_char: return "unigram-char";
    case TokenizeMode::pre_segmented: return "pre-segmented";
  }
  return "whitespace";
}

std::vector<std::string> tokenize(std::string_view text, TokenizeMode mode) {
  switch (mode) {
    case TokenizeMode::whitespace: return tokenize_whitespace(text);
    case TokenizeMode::unigram_char: return tokenize_unigram_char(text);
    case TokenizeMode::pre_segmented: return tokenize_pre_segmented(text);
  }
  return {};
}

std::optional<TokenId> Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

double Vocabulary::probability(TokenId id) const {
  return static_cast<double>(count(id)) / static_cast<double>(total_);
}

std::vector<TokenId> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<TokenId> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens)
    if (auto i = id(t)) ids.push_back(*i);
  return ids;
}

nlohmann::json Vocabulary::to_json() const {
  nlohmann::json entries = nlohmann::json::array();
  for (std::size_t i = 0; i < tokens_.size(); ++i)
    entries.push_back({{"token", tokens_[i]}, {"id", i}, {"count", counts_[i]}});
  return nlohmann::json{{"min_count", min_count_}, {"total_tokens", total_}, {"tokens", entries}};
}

Vocabulary Vocabulary::from_json(const nlohmann::json& j) {
  Vocabulary v;
  v.min_count_ = j.at("min_count").get<int>();
  const auto& entries = j.at("tokens");
  v.tokens_.resize(entries.size());
  v.counts_.resize(entries.size());
  for (const auto& e : entries) {
    auto id = e.at("id").get<std::size_t>();
    if (id >= entries.size()) throw ValidationError("vocabulary id out of range");
    v.tokens_[id] = e.at("token").get<std::string>();
    v.counts_[id] = e.at("count").get<std::int64_t>();
  }
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    if (!v.index_.emplace(v.tokens_[i], static_cast<TokenId>(i)).second)
      throw ValidationError("duplicate vocabulary token '" + v.tokens_[i] + "'");
    v.total_ += v.counts_[i];
  }
  if (v.total_ != j.at("total_tokens").get<std::int64_t>()) throw ValidationError("vocabulary total_tokens mismatch");
  return v;
}

Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus, int min_count) {
  if (min_count < 1) throw ValidationError("min_count must be >= 1");
  std::map<std::string, std::int64_t> counts;
  for (const auto& sentence : corpus)
    for (const auto& t : sentence) ++counts[t];
  if (counts.empty()) throw ValidationError("cannot build a vocabulary from an empty corpus");

  std::vector<std::pair<std::string, std::int64_t>> kept;
  for (auto& [tok, c] : counts)
    if (c >= min_count) kept.emplace_back(tok, c);
  if (kept.empty()) throw ValidationError("no token reaches min_count " + std::to_string(min_count));
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });

  Vocabulary v;
  v.min_count_ = min_count;
  for (auto& [tok, c] : kept) {
    v.index_.emplace(tok, static_cast<TokenId>(v.tokens_.size()));
    v.tokens_.push_back(tok);
    v.counts_.push_back(c);
    v.total_ += c;
  }
  return v;
}

}  // namespace spamdet
