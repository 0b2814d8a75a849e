#include "spamdet/embed_word.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "spamdet/binary_io.h"
#include "spamdet/error.h"
#include "spamdet/random.h"

namespace spamdet {

namespace {

constexpr char kEmbMagic[5] = "SDWE";
constexpr std::uint32_t kEmbVersion = 1;

double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }
double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

class NegativeSampler {
 public:
  explicit NegativeSampler(const Vocabulary& vocab) : cdf_(vocab.size()) {
    double acc = 0.0;
    for (std::size_t i = 0; i < vocab.size(); ++i) {
      acc += std::pow(static_cast<double>(vocab.count(static_cast<TokenId>(i))), 0.75);
      cdf_[i] = acc;
    }
    for (auto& c : cdf_) c /= acc;
  }

  TokenId operator()(Rng& rng) {
    const double u = uniform_(rng);
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    if (it == cdf_.end()) --it;
    return static_cast<TokenId>(it - cdf_.begin());
  }

 private:
  std::vector<double> cdf_;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace

WordEmbeddings train_skipgram(const std::vector<std::vector<TokenId>>& corpus, const Vocabulary& vocab,
                              const SkipGramConfig& config, SkipGramStats* stats) {
  if (config.dim == 0) throw ValidationError("embedding dimension must be positive");
  if (vocab.empty()) throw ValidationError("vocabulary is empty");
  if (config.max_window < 1 || config.negatives < 0 || config.epochs < 1)
    throw ValidationError("invalid skip-gram configuration");
  std::size_t total_tokens = 0;
  for (const auto& s : corpus) total_tokens += s.size();
  if (total_tokens < 2) throw ValidationError("skip-gram needs a corpus of at least 2 tokens");

  const std::size_t V = vocab.size(), d = config.dim;
  Rng rng(config.seed);
  std::vector<double> in(V * d), out(V * d, 0.0);
  {
    std::uniform_real_distribution<double> init(-0.5 / static_cast<double>(d), 0.5 / static_cast<double>(d));
    for (auto& x : in) x = init(rng);
  }
  NegativeSampler sampler(vocab);
  std::uniform_int_distribution<int> window(1, config.max_window);
  std::vector<double> grad_in(d);

  const double planned = static_cast<double>(total_tokens) * config.epochs;
  std::size_t processed = 0;
  if (stats) stats->epoch_loss.clear();

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t pairs = 0;
    for (const auto& sentence : corpus) {
      const auto n = static_cast<std::ptrdiff_t>(sentence.size());
      for (std::ptrdiff_t i = 0; i < n; ++i, ++processed) {
        const double lr = config.learning_rate * std::max(1.0 - static_cast<double>(processed) / planned, 1e-4);
        const std::ptrdiff_t c = window(rng);
        double* center = &in[static_cast<std::size_t>(sentence[i]) * d];
        for (std::ptrdiff_t j = std::max<std::ptrdiff_t>(0, i - c); j <= std::min(n - 1, i + c); ++j) {
          if (j == i) continue;
          std::fill(grad_in.begin(), grad_in.end(), 0.0);
          for (int s = 0; s <= config.negatives; ++s) {
            TokenId target;
            double label;
            if (s == 0) {
              target = sentence[j];
              label = 1.0;
            } else {
              target = sampler(rng);
              if (target == sentence[j]) continue;
              label = 0.0;
            }
            double* ctx = &out[static_cast<std::size_t>(target) * d];
            double f = 0.0;
            for (std::size_t k = 0; k < d; ++k) f += center[k] * ctx[k];
            loss_sum -= label > 0.5 ? log_sigmoid(f) : log_sigmoid(-f);
            const double g = (label - sigmoid(f)) * lr;
            for (std::size_t k = 0; k < d; ++k) {
              grad_in[k] += g * ctx[k];
              ctx[k] += g * center[k];
            }
          }
          for (std::size_t k = 0; k < d; ++k) center[k] += grad_in[k];
          ++pairs;
        }
      }
    }
    if (stats) stats->epoch_loss.push_back(pairs ? loss_sum / static_cast<double>(pairs) : 0.0);
  }

  WordEmbeddings emb;
  emb.vectors.resize(static_cast<Eigen::Index>(V), static_cast<Eigen::Index>(d));
  for (std::size_t w = 0; w < V; ++w)
    for (std::size_t k = 0; k < d; ++k)
      emb.vectors(static_cast<Eigen::Index>(w), static_cast<Eigen::Index>(k)) = in[w * d + k];
  return emb;
}

void WordEmbeddings::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  bin::write_magic(out, kEmbMagic);
  bin::write<std::uint32_t>(out, kEmbVersion);
  bin::write<std::uint64_t>(out, size());
  bin::write<std::uint64_t>(out, dim());
  for (Eigen::Index r = 0; r < vectors.rows(); ++r)
    for (Eigen::Index c = 0; c < vectors.cols(); ++c) bin::write<double>(out, vectors(r, c));
}

WordEmbeddings WordEmbeddings::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  bin::expect_magic(in, kEmbMagic, "word embedding");
  if (bin::read<std::uint32_t>(in) != kEmbVersion) throw ValidationError("unsupported embedding version");
  const auto rows = bin::read<std::uint64_t>(in);
  const auto cols = bin::read<std::uint64_t>(in);
  WordEmbeddings emb;
  emb.vectors.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < emb.vectors.rows(); ++r)
    for (Eigen::Index c = 0; c < emb.vectors.cols(); ++c) emb.vectors(r, c) = bin::read<double>(in);
  return emb;
}

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw ValidationError("cosine of vectors with different sizes");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) throw ValidationError("cosine of a zero vector is undefined");
  return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

double cosine(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  return cosine(std::span<const double>(u.data(), static_cast<std::size_t>(u.size())),
                std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

std::vector<std::string> nearest_words(const WordEmbeddings& emb, const Vocabulary& vocab, const std::string& token,
                                       std::size_t k) {
  auto id = vocab.id(token);
  if (!id) throw ValidationError("unknown token '" + token + "'");
  if (emb.size() != vocab.size()) throw ValidationError("embedding rows do not match vocabulary size");
  const Eigen::VectorXd q = emb.row(*id);
  std::vector<std::pair<double, TokenId>> scored;
  for (std::size_t i = 0; i < emb.size(); ++i) {
    const auto other = static_cast<TokenId>(i);
    if (other == *id) continue;
    const Eigen::VectorXd v = emb.row(other);
    const double sim = v.squaredNorm() == 0.0 || q.squaredNorm() == 0.0 ? -1.0 : cosine(q, v);
    scored.emplace_back(sim, other);
  }
  k = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(),
                    [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(vocab.token(scored[i].second));
  return out;
}

}  // namespace spamdet
