#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "spamdet/embed_word.h"
#include "spamdet/text.h"

namespace spamdet {

enum class Aspect { plot = 0, visual_effect, sound_effect, acting_skill };
inline constexpr std::size_t kAspectCount = 4;
inline constexpr std::array<Aspect, kAspectCount> kAspects{Aspect::plot, Aspect::visual_effect, Aspect::sound_effect,
                                                            Aspect::acting_skill};

std::string_view to_string(Aspect a);
Aspect parse_aspect(std::string_view s);

enum class WordOrigin { base, expanded };

struct FeatureWord {
  std::string word;
  WordOrigin origin = WordOrigin::base;
  bool operator==(const FeatureWord&) const = default;
};

// Aspect-tagged movie-element words. A word belongs to at most one aspect.
class FeatureWordList {
 public:
  FeatureWordList() = default;

  // plot / visual / sound / acting seed words used for English corpora.
  static FeatureWordList standard();

  // Returns false (and leaves the list unchanged) if the word is already listed.
  bool add(std::string word, Aspect aspect, WordOrigin origin);

  std::optional<Aspect> aspect_of(std::string_view word) const;
  bool contains(std::string_view word) const { return aspect_of(word).has_value(); }
  const std::vector<FeatureWord>& words(Aspect a) const { return by_aspect_[static_cast<std::size_t>(a)]; }
  std::size_t size() const { return index_.size(); }

  nlohmann::json to_json() const;
  static FeatureWordList from_json(const nlohmann::json& j);

  bool operator==(const FeatureWordList& o) const { return by_aspect_ == o.by_aspect_; }

 private:
  std::array<std::vector<FeatureWord>, kAspectCount> by_aspect_;
  std::unordered_map<std::string, Aspect> index_;
};

struct ExpansionConfig {
  std::size_t k_per_seed = 10;
  double freq_quantile = 0.2;  // neighbours must rank in this top fraction of the vocabulary by count
};

// Adds each seed's nearest neighbours that are frequent enough. Aspects are
// processed in order, so a word claimed by an earlier aspect stays there.
// Seeds missing from the vocabulary are skipped with a warning.
FeatureWordList expand_feature_words(const FeatureWordList& base, const WordEmbeddings& emb, const Vocabulary& vocab,
                                     const ExpansionConfig& config = {});

struct SifConfig {
  double alpha = 0.95;
  double beta = 0.1;  // kept for the record; does not enter the weights
  double z = 0.0;     // partition estimate; 0 means "use |V|"
  std::size_t dim = 100;

  nlohmann::json to_json() const;
  static SifConfig from_json(const nlohmann::json& j);
};

// Copy of cfg with z resolved against the vocabulary and ranges checked.
SifConfig resolve_sif_config(SifConfig cfg, const Vocabulary& vocab);

// (1 - a) / (1 + a (Z p - 1)), with a forced to 0 for feature words.
double sif_weight(double p_w, const SifConfig& cfg, bool is_feature);

// Weighted mean of in-vocabulary word vectors. With use_attention=false the
// feature list is ignored (plain SIF weighting). Throws ValidationError when
// no token is in the vocabulary.
Eigen::VectorXd embed_raw(const std::vector<std::string>& tokens, const WordEmbeddings& emb, const Vocabulary& vocab,
                          const FeatureWordList& features, const SifConfig& cfg, bool use_attention = true);

struct CommonComponent {
  Eigen::MatrixXd vectors;  // one row per input, projection removed
  Eigen::VectorXd u;        // unit vector, sign fixed so its largest |entry| is positive
  int iterations = 0;
};

// First right-singular direction by power iteration on the Gram matrix.
Eigen::VectorXd first_singular_direction(const Eigen::MatrixXd& rows, int* iterations = nullptr, double tol = 1e-9,
                                         int max_iter = 1000);

// Rows minus their projection onto u.
Eigen::MatrixXd project_out(const Eigen::MatrixXd& rows, const Eigen::VectorXd& u);

// Needs at least two rows, not all zero.
CommonComponent remove_common_component(const Eigen::MatrixXd& rows);

// Share of feature-word hits per aspect, in aspect order; zero if no hits.
Eigen::Vector4d attention_profile(const std::vector<std::string>& tokens, const FeatureWordList& features);

}  // namespace spamdet
