#include "spamdet/embed_sentence.h"

#include <algorithm>
#include <cmath>

#include "spamdet/error.h"
#include "spamdet/log.h"

namespace spamdet {

namespace {

constexpr std::array<std::string_view, kAspectCount> kAspectNames{"plot", "visual_effect", "sound_effect",
                                                                  "acting_skill"};

}  // namespace

std::string_view to_string(Aspect a) { return kAspectNames[static_cast<std::size_t>(a)]; }

Aspect parse_aspect(std::string_view s) {
  for (std::size_t i = 0; i < kAspectCount; ++i)
    if (kAspectNames[i] == s) return static_cast<Aspect>(i);
  throw ValidationError("unknown aspect '" + std::string(s) + "'");
}

FeatureWordList FeatureWordList::standard() {
  FeatureWordList f;
  const std::array<std::array<const char*, 5>, kAspectCount> seeds{{
      {"story", "plot", "script", "logic", "scenario"},
      {"scene", "picture", "scenery", "shot", "editing"},
      {"music", "song", "sound", "soundtrack", "theme"},
      {"character", "role", "acting", "actor", "cast"},
  }};
  for (std::size_t a = 0; a < kAspectCount; ++a)
    for (const char* w : seeds[a]) f.add(w, static_cast<Aspect>(a), WordOrigin::base);
  return f;
}

bool FeatureWordList::add(std::string word, Aspect aspect, WordOrigin origin) {
  if (word.empty()) throw ValidationError("empty feature word");
  if (index_.count(word)) return false;
  index_.emplace(word, aspect);
  by_aspect_[static_cast<std::size_t>(aspect)].push_back({std::move(word), origin});
  return true;
}

std::optional<Aspect> FeatureWordList::aspect_of(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

nlohmann::json FeatureWordList::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (Aspect a : kAspects) {
    auto arr = nlohmann::json::array();
    for (const auto& w : words(a))
      arr.push_back({{"word", w.word}, {"origin", w.origin == WordOrigin::base ? "base" : "expanded"}});
    j[std::string(to_string(a))] = arr;
  }
  return j;
}

FeatureWordList FeatureWordList::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("feature list must be a JSON object");
  FeatureWordList f;
  for (Aspect a : kAspects) {
    const std::string key(to_string(a));
    if (!j.contains(key)) throw ValidationError("feature list missing aspect '" + key + "'");
    for (const auto& e : j.at(key)) {
      // Plain strings are accepted as base words.
      if (e.is_string()) {
        f.add(e.get<std::string>(), a, WordOrigin::base);
        continue;
      }
      const std::string origin = e.value("origin", "base");
      if (origin != "base" && origin != "expanded") throw ValidationError("bad feature word origin '" + origin + "'");
      if (!f.add(e.at("word").get<std::string>(), a, origin == "base" ? WordOrigin::base : WordOrigin::expanded))
        throw ValidationError("feature word '" + e.at("word").get<std::string>() + "' listed twice");
    }
  }
  for (auto it = j.begin(); it != j.end(); ++it) parse_aspect(it.key());
  return f;
}

FeatureWordList expand_feature_words(const FeatureWordList& base, const WordEmbeddings& emb, const Vocabulary& vocab,
                                     const ExpansionConfig& config) {
  if (emb.size() == 0 || emb.dim() == 0) throw ValidationError("cannot expand feature words with an empty embedding");
  if (emb.size() != vocab.size()) throw ValidationError("embedding rows do not match vocabulary size");
  if (!(config.freq_quantile > 0.0 && config.freq_quantile <= 1.0))
    throw ValidationError("freq_quantile must be in (0, 1]");

  // Ids are sorted by descending count, so the cut is a count threshold.
  const auto top = static_cast<std::size_t>(std::ceil(config.freq_quantile * static_cast<double>(vocab.size())));
  const std::int64_t min_count = vocab.count(static_cast<TokenId>(std::max<std::size_t>(top, 1) - 1));

  FeatureWordList out = base;
  if (config.k_per_seed == 0) return out;
  for (Aspect a : kAspects) {
    for (const auto& seed : base.words(a)) {
      if (!vocab.id(seed.word)) {
        warn("feature word '" + seed.word + "' not in vocabulary; skipped");
        continue;
      }
      for (const auto& w : nearest_words(emb, vocab, seed.word, config.k_per_seed))
        if (vocab.count(*vocab.id(w)) >= min_count) out.add(w, a, WordOrigin::expanded);
    }
  }
  return out;
}

nlohmann::json SifConfig::to_json() const {
  return {{"alpha", alpha}, {"beta", beta}, {"z", z}, {"dim", dim}};
}

SifConfig SifConfig::from_json(const nlohmann::json& j) {
  SifConfig c;
  c.alpha = j.value("alpha", c.alpha);
  c.beta = j.value("beta", c.beta);
  c.z = j.value("z", c.z);
  c.dim = j.value("dim", c.dim);
  return c;
}

SifConfig resolve_sif_config(SifConfig cfg, const Vocabulary& vocab) {
  if (!(cfg.alpha >= 0.0 && cfg.alpha < 1.0)) throw ValidationError("alpha must be in [0, 1)");
  if (cfg.z == 0.0) cfg.z = static_cast<double>(vocab.size());
  if (!(cfg.z > 0.0)) throw ValidationError("partition estimate Z must be positive");
  return cfg;
}

double sif_weight(double p_w, const SifConfig& cfg, bool is_feature) {
  if (!(p_w > 0.0 && p_w <= 1.0)) throw ValidationError("word probability must be in (0, 1]");
  if (is_feature) return 1.0;
  if (!(cfg.z > 0.0)) throw ValidationError("partition estimate Z must be positive");
  return (1.0 - cfg.alpha) / (1.0 + cfg.alpha * (cfg.z * p_w - 1.0));
}

Eigen::VectorXd embed_raw(const std::vector<std::string>& tokens, const WordEmbeddings& emb, const Vocabulary& vocab,
                          const FeatureWordList& features, const SifConfig& cfg, bool use_attention) {
  if (emb.size() != vocab.size()) throw ValidationError("embedding rows do not match vocabulary size");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(emb.dim()));
  std::size_t used = 0;
  for (const auto& t : tokens) {
    auto id = vocab.id(t);
    if (!id) continue;
    const bool feature = use_attention && features.contains(t);
    sum += sif_weight(vocab.probability(*id), cfg, feature) * emb.vectors.row(*id).transpose();
    ++used;
  }
  if (used == 0) throw ValidationError("review has no in-vocabulary tokens");
  return sum / static_cast<double>(used);
}

Eigen::VectorXd first_singular_direction(const Eigen::MatrixXd& rows, int* iterations, double tol, int max_iter) {
  if (rows.rows() == 0 || rows.cols() == 0) throw ValidationError("no vectors");
  const Eigen::MatrixXd gram = rows.transpose() * rows;
  Eigen::Index start = 0;
  rows.rowwise().squaredNorm().maxCoeff(&start);
  Eigen::VectorXd v = rows.row(start).transpose();
  if (v.norm() == 0.0) throw NumericalError("all vectors are zero");
  v.normalize();
  int it = 0;
  for (; it < max_iter; ++it) {
    Eigen::VectorXd next = gram * v;
    const double n = next.norm();
    if (n == 0.0) throw NumericalError("power iteration collapsed to zero");
    next /= n;
    const double delta = (next - v).norm();
    v = next;
    if (delta < tol) {
      ++it;
      break;
    }
  }
  if (it >= max_iter) warn("power iteration did not reach tolerance in " + std::to_string(max_iter) + " steps");
  Eigen::Index big = 0;
  v.cwiseAbs().maxCoeff(&big);
  if (v(big) < 0) v = -v;
  if (iterations) *iterations = it;
  return v;
}

Eigen::MatrixXd project_out(const Eigen::MatrixXd& rows, const Eigen::VectorXd& u) {
  if (rows.cols() != u.size()) throw ValidationError("direction has wrong dimension");
  return rows - (rows * u) * u.transpose();
}

CommonComponent remove_common_component(const Eigen::MatrixXd& rows) {
  if (rows.rows() < 2) throw ValidationError("common-component removal needs at least 2 vectors");
  if (rows.isZero(0.0)) throw ValidationError("all sentence vectors are zero");
  CommonComponent out;
  out.u = first_singular_direction(rows, &out.iterations);
  out.vectors = project_out(rows, out.u);
  return out;
}

Eigen::Vector4d attention_profile(const std::vector<std::string>& tokens, const FeatureWordList& features) {
  Eigen::Vector4d counts = Eigen::Vector4d::Zero();
  for (const auto& t : tokens)
    if (auto a = features.aspect_of(t)) counts(static_cast<Eigen::Index>(*a)) += 1.0;
  const double total = counts.sum();
  return total > 0 ? Eigen::Vector4d(counts / total) : counts;
}

}  // namespace spamdet
