#include "spamdet/pipeline.h"

#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <thread>

#include "spamdet/error.h"
#include "spamdet/log.h"
#include "spamdet/random.h"

namespace spamdet {

namespace {

using nlohmann::json;

// Overlays `given` on `defaults`, rejecting keys the defaults do not have.
json overlay(const json& defaults, const json& given, const std::string& section) {
  if (!given.is_object()) throw ValidationError("config section '" + section + "' must be an object");
  json out = defaults;
  for (auto it = given.begin(); it != given.end(); ++it) {
    if (!defaults.contains(it.key())) throw ValidationError("unknown config key '" + section + "." + it.key() + "'");
    if (defaults[it.key()].is_object()) out[it.key()] = overlay(defaults[it.key()], it.value(), section + "." + it.key());
    else out[it.key()] = it.value();
  }
  return out;
}

json without_seed(json j) {
  j.erase("seed");
  return j;
}

json skipgram_json(const SkipGramConfig& c) {
  return {{"dim", c.dim},
          {"max_window", c.max_window},
          {"negatives", c.negatives},
          {"epochs", c.epochs},
          {"learning_rate", c.learning_rate}};
}

json iforest_json(const IForestConfig& c) { return {{"n_trees", c.n_trees}, {"subsample", c.subsample}}; }

json vae_json(const VaeConfig& c) {
  return {{"hidden", c.hidden},
          {"latent", c.latent},
          {"epochs", c.epochs},
          {"batch", c.batch},
          {"learning_rate", c.learning_rate},
          {"score_samples", c.score_samples},
          {"logvar_bound", c.logvar_bound}};
}

}  // namespace

json PipelineConfig::to_json() const {
  return {{"seed", seed},
          {"paths", {{"corpus", corpus_dir}, {"work", work_dir}}},
          {"threads", threads},
          {"synth", without_seed(synth.to_json())},
          {"embed",
           {{"tokenize", std::string(to_string(embed.tokenize))},
            {"min_count", embed.min_count},
            {"skipgram", skipgram_json(embed.skipgram)},
            {"expand_features", embed.expand_features},
            {"expansion", {{"k_per_seed", embed.expansion.k_per_seed}, {"freq_quantile", embed.expansion.freq_quantile}}},
            {"sif", embed.sif.to_json()},
            {"use_attention", embed.use_attention}}},
          {"gan", without_seed(gan.to_json())},
          {"lof", {{"k", lof_k}}},
          {"iforest", iforest_json(iforest)},
          {"vae", vae_json(vae)},
          {"detection",
           {{"cutoff", detection.cutoff},
            {"contamination", detection.contamination},
            {"min_history", detection.min_history}}},
          {"forensics",
           {{"score_granularity", forensics.score_granularity},
            {"spike_sigmas", forensics.spike_sigmas},
            {"opposite_delta", forensics.opposite_delta},
            {"min_prior_ratings", forensics.min_prior_ratings}}},
          {"eval", {{"coherence_k", coherence_k}}}};
}

PipelineConfig PipelineConfig::from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  if (!j.contains("seed")) throw ValidationError("config must set 'seed'");
  const json m = overlay(PipelineConfig{}.to_json(), j, "config");
  PipelineConfig c;
  try {
    c.seed = m["seed"];
    c.corpus_dir = m["paths"]["corpus"];
    c.work_dir = m["paths"]["work"];
    c.threads = m["threads"];
    c.synth = SynthConfig::from_json(m["synth"]);
    const json& e = m["embed"];
    c.embed.tokenize = parse_tokenize_mode(e["tokenize"].get<std::string>());
    c.embed.min_count = e["min_count"];
    c.embed.skipgram.dim = e["skipgram"]["dim"];
    c.embed.skipgram.max_window = e["skipgram"]["max_window"];
    c.embed.skipgram.negatives = e["skipgram"]["negatives"];
    c.embed.skipgram.epochs = e["skipgram"]["epochs"];
    c.embed.skipgram.learning_rate = e["skipgram"]["learning_rate"];
    c.embed.expand_features = e["expand_features"];
    c.embed.expansion.k_per_seed = e["expansion"]["k_per_seed"];
    c.embed.expansion.freq_quantile = e["expansion"]["freq_quantile"];
    c.embed.sif = SifConfig::from_json(e["sif"]);
    c.embed.use_attention = e["use_attention"];
    c.gan = AdcganConfig::from_json(m["gan"]);
    c.lof_k = m["lof"]["k"];
    c.iforest.n_trees = m["iforest"]["n_trees"];
    c.iforest.subsample = m["iforest"]["subsample"];
    const json& v = m["vae"];
    c.vae.hidden = v["hidden"];
    c.vae.latent = v["latent"];
    c.vae.epochs = v["epochs"];
    c.vae.batch = v["batch"];
    c.vae.learning_rate = v["learning_rate"];
    c.vae.score_samples = v["score_samples"];
    c.vae.logvar_bound = v["logvar_bound"];
    c.detection.cutoff = m["detection"]["cutoff"];
    c.detection.contamination = m["detection"]["contamination"];
    c.detection.min_history = m["detection"]["min_history"];
    c.forensics.score_granularity = m["forensics"]["score_granularity"];
    c.forensics.spike_sigmas = m["forensics"]["spike_sigmas"];
    c.forensics.opposite_delta = m["forensics"]["opposite_delta"];
    c.forensics.min_prior_ratings = m["forensics"]["min_prior_ratings"];
    c.coherence_k = m["eval"]["coherence_k"];
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError(std::string("bad config value: ") + ex.what());
  }
  if (!(c.detection.contamination >= 0 && c.detection.contamination <= 1))
    throw ValidationError("detection.contamination must be in [0, 1]");
  if (c.embed.min_count < 1) throw ValidationError("embed.min_count must be at least 1");
  if (c.embed.sif.dim != c.embed.skipgram.dim || c.gan.vector_dim != c.embed.skipgram.dim)
    throw ValidationError("embedding, SIF and GAN vector dimensions must agree");
  c.derive_stage_seeds();
  return c;
}

void PipelineConfig::derive_stage_seeds() {
  synth.seed = derive_seed(seed, "synth");
  embed.skipgram.seed = derive_seed(seed, "skipgram");
  gan.seed = derive_seed(seed, "gan");
  iforest.seed = derive_seed(seed, "iforest");
  vae.seed = derive_seed(seed, "vae");
}

// Paths and thread count do not change results, so they stay out of the hash.
std::uint64_t PipelineConfig::hash() const {
  auto j = to_json();
  j.erase("paths");
  j.erase("threads");
  return fnv1a64(j.dump());
}

std::vector<std::vector<std::string>> tokenize_reviews(const std::vector<Review>& reviews, TokenizeMode mode) {
  std::vector<std::vector<std::string>> out;
  out.reserve(reviews.size());
  for (const auto& r : reviews) out.push_back(tokenize(r.text, mode));
  return out;
}

EmbeddingModel train_embedding(const std::vector<Review>& reviews, const EmbedConfig& config) {
  const auto tokens = tokenize_reviews(reviews, config.tokenize);
  EmbeddingModel m;
  m.vocab = build_vocab(tokens, config.min_count);
  std::vector<std::vector<TokenId>> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(m.vocab.encode(t));
  m.words = train_skipgram(ids, m.vocab, config.skipgram);
  m.features = FeatureWordList::standard();
  if (config.expand_features) m.features = expand_feature_words(m.features, m.words, m.vocab, config.expansion);
  m.sif = resolve_sif_config(config.sif, m.vocab);
  return m;
}

ReviewVectors embed_reviews(const std::vector<Review>& reviews, const EmbeddingModel& model, TokenizeMode mode,
                            bool use_attention, std::int64_t cutoff) {
  if (reviews.size() < 2) throw ValidationError("need at least two reviews to embed");
  Eigen::MatrixXd raw(static_cast<Eigen::Index>(reviews.size()), static_cast<Eigen::Index>(model.words.dim()));
  std::size_t empty = 0;
  ReviewVectors out;
  for (std::size_t i = 0; i < reviews.size(); ++i) {
    const auto tokens = tokenize(reviews[i].text, mode);
    const auto row = static_cast<Eigen::Index>(i);
    try {
      raw.row(row) = embed_raw(tokens, model.words, model.vocab, model.features, model.sif, use_attention).transpose();
    } catch (const ValidationError&) {
      raw.row(row).setZero();
      ++empty;
    }
    out.review_ids.push_back(reviews[i].review_id);
  }
  if (empty) warn(std::to_string(empty) + " review(s) have no in-vocabulary token; embedded as zero vectors");

  // Training rows per user, skipping zero vectors, which carry no direction.
  std::map<std::string, std::vector<Eigen::Index>> all_rows, train_rows;
  std::vector<Eigen::Index> pooled;
  for (std::size_t i = 0; i < reviews.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    all_rows[reviews[i].user_id].push_back(row);
    if (reviews[i].timestamp < cutoff && !raw.row(row).isZero(0.0)) {
      train_rows[reviews[i].user_id].push_back(row);
      pooled.push_back(row);
    }
  }
  auto gather = [&](const std::vector<Eigen::Index>& idx) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(idx.size()), raw.cols());
    for (std::size_t k = 0; k < idx.size(); ++k) m.row(static_cast<Eigen::Index>(k)) = raw.row(idx[k]);
    return m;
  };
  std::optional<Eigen::VectorXd> fallback;
  std::size_t fell_back = 0;
  out.vectors = raw;
  for (const auto& [user, rows] : all_rows) {
    const auto it = train_rows.find(user);
    Eigen::VectorXd u;
    if (it != train_rows.end() && it->second.size() >= 2) {
      u = remove_common_component(gather(it->second)).u;
    } else {
      if (!fallback) {
        if (pooled.size() < 2) throw ValidationError("need at least two embeddable reviews before the cutoff");
        fallback = remove_common_component(gather(pooled)).u;
      }
      u = *fallback;
      ++fell_back;
    }
    for (Eigen::Index r : rows) out.vectors.row(r) -= out.vectors.row(r).dot(u) * u.transpose();
    out.common[user] = std::move(u);
  }
  if (fell_back)
    warn(std::to_string(fell_back) + " user(s) have fewer than two training reviews; used the pooled common component");
  return out;
}

std::vector<UserRows> split_rows(const std::vector<Review>& reviews, std::int64_t cutoff) {
  std::map<std::string, UserRows> users;
  for (std::size_t i = 0; i < reviews.size(); ++i) {
    auto& u = users[reviews[i].user_id];
    u.user_id = reviews[i].user_id;
    (reviews[i].timestamp < cutoff ? u.train : u.test).push_back(i);
  }
  std::vector<UserRows> out;
  for (auto& [id, u] : users) out.push_back(std::move(u));
  return out;
}

std::string_view to_string(Method m) {
  switch (m) {
    case Method::adcgan: return "adcgan";
    case Method::lof: return "lof";
    case Method::iforest: return "iforest";
    case Method::vae: return "vae";
  }
  return "?";
}

Method parse_method(std::string_view s) {
  for (Method m : {Method::adcgan, Method::lof, Method::iforest, Method::vae})
    if (to_string(m) == s) return m;
  throw ValidationError("unknown method '" + std::string(s) + "' (expected adcgan, lof, iforest or vae)");
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& f) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

namespace {

Eigen::MatrixXd gather(const Eigen::MatrixXd& m, const std::vector<std::size_t>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

}  // namespace

Eigen::MatrixXd baseline_features(const Eigen::MatrixXd& vectors, const Eigen::MatrixXd& conditions,
                                  const std::vector<std::size_t>& train, const std::vector<std::size_t>& rows) {
  const Eigen::MatrixXd tv = gather(vectors, train);
  const Eigen::RowVectorXd mean = tv.colwise().mean();
  Eigen::RowVectorXd sd = (tv.rowwise() - mean).array().square().colwise().mean().sqrt();
  for (auto& s : sd) s = s > 1e-12 ? s : 1.0;
  const Eigen::MatrixXd v = gather(vectors, rows);
  Eigen::MatrixXd out(v.rows(), vectors.cols() + conditions.cols());
  out.leftCols(vectors.cols()) = ((v.rowwise() - mean).array().rowwise() / sd.array()).matrix();
  out.rightCols(conditions.cols()) = gather(conditions, rows);
  return out;
}

namespace {

bool enough_history(const UserRows& u, const PipelineConfig& config) { return u.train.size() >= config.detection.min_history; }

void report_skipped(const std::vector<UserRows>& users, const PipelineConfig& config) {
  std::size_t n = 0;
  for (const auto& u : users) n += !enough_history(u, config);
  if (n)
    warn(std::to_string(n) + " user(s) have fewer than " + std::to_string(config.detection.min_history) +
         " historical reviews and were not scored");
}

void scatter(Eigen::VectorXd& scores, const std::vector<std::size_t>& rows, const Eigen::VectorXd& s) {
  for (std::size_t i = 0; i < rows.size(); ++i) scores(static_cast<Eigen::Index>(rows[i])) = s(static_cast<Eigen::Index>(i));
}

}  // namespace

std::map<std::string, AdcganModel> train_user_models(const std::vector<UserRows>& users, const Eigen::MatrixXd& vectors,
                                                     const Eigen::MatrixXd& conditions, const PipelineConfig& config) {
  if (vectors.rows() != conditions.rows()) throw ValidationError("vectors and conditions differ in row count");
  std::vector<AdcganModel> trained(users.size());
  parallel_for(users.size(), config.threads, [&](std::size_t ui) {
    const UserRows& u = users[ui];
    if (!enough_history(u, config)) return;
    AdcganConfig gc = config.gan;
    gc.seed = derive_seed(gc.seed, u.user_id);
    trained[ui] = AdcganModel(u.user_id, gc);
    trained[ui].train(gather(vectors, u.train), gather(conditions, u.train));
  });
  report_skipped(users, config);
  std::map<std::string, AdcganModel> out;
  for (std::size_t ui = 0; ui < users.size(); ++ui)
    if (trained[ui].trained()) out.emplace(users[ui].user_id, std::move(trained[ui]));
  return out;
}

Eigen::VectorXd score_with_models(std::map<std::string, AdcganModel>& models, const std::vector<UserRows>& users,
                                  const Eigen::MatrixXd& vectors, const Eigen::MatrixXd& conditions) {
  Eigen::VectorXd scores = Eigen::VectorXd::Constant(vectors.rows(), std::numeric_limits<double>::quiet_NaN());
  for (const auto& u : users) {
    auto it = models.find(u.user_id);
    if (it == models.end() || u.test.empty()) continue;
    scatter(scores, u.test, it->second.score(gather(vectors, u.test), gather(conditions, u.test)));
  }
  return scores;
}

Eigen::VectorXd score_test_rows(Method method, const std::vector<UserRows>& users, const Eigen::MatrixXd& vectors,
                                const Eigen::MatrixXd& conditions, const PipelineConfig& config) {
  if (vectors.rows() != conditions.rows()) throw ValidationError("vectors and conditions differ in row count");
  if (method == Method::adcgan) {
    auto models = train_user_models(users, vectors, conditions, config);
    return score_with_models(models, users, vectors, conditions);
  }
  Eigen::VectorXd scores = Eigen::VectorXd::Constant(vectors.rows(), std::numeric_limits<double>::quiet_NaN());
  parallel_for(users.size(), config.threads, [&](std::size_t ui) {
    const UserRows& u = users[ui];
    if (!enough_history(u, config) || u.test.empty()) return;
    const std::uint64_t user_seed = derive_seed(config.seed, u.user_id);
    const Eigen::MatrixXd train = baseline_features(vectors, conditions, u.train, u.train);
    const Eigen::MatrixXd test = baseline_features(vectors, conditions, u.train, u.test);
    Eigen::VectorXd s;
    if (method == Method::lof) {
      s = lof_scores(train, test, config.lof_k);
    } else if (method == Method::iforest) {
      IForestConfig ic = config.iforest;
      ic.seed = derive_seed(ic.seed, user_seed);
      s = iforest_scores(train, test, ic);
    } else {
      VaeConfig vc = config.vae;
      vc.seed = derive_seed(vc.seed, user_seed);
      s = vae_scores(train, test, vc);
    }
    scatter(scores, u.test, s);
  });
  report_skipped(users, config);
  return scores;
}

}  // namespace spamdet
