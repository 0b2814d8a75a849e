#include "spamdet/baselines.h"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <numeric>

#include "spamdet/error.h"

namespace spamdet {

namespace {

struct Neighbour {
  double dist;
  Eigen::Index index;
};

// k nearest training rows of `query`, ties by index. `skip` excludes one row.
std::vector<Neighbour> knn(const Eigen::MatrixXd& train, const Eigen::RowVectorXd& query, std::size_t k,
                           Eigen::Index skip = -1) {
  std::vector<Neighbour> all;
  all.reserve(static_cast<std::size_t>(train.rows()));
  for (Eigen::Index i = 0; i < train.rows(); ++i)
    if (i != skip) all.push_back({(train.row(i) - query).norm(), i});
  auto less = [](const Neighbour& a, const Neighbour& b) { return a.dist != b.dist ? a.dist < b.dist : a.index < b.index; };
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), less);
  all.resize(k);
  return all;
}

double local_reachability(const std::vector<Neighbour>& nbrs, const std::vector<double>& k_distance) {
  double sum = 0.0;
  for (const auto& n : nbrs) sum += std::max(k_distance[static_cast<std::size_t>(n.index)], n.dist);
  return 1.0 / (sum / static_cast<double>(nbrs.size()) + 1e-10);
}

}  // namespace

Eigen::VectorXd lof_scores(const Eigen::MatrixXd& train, const Eigen::MatrixXd& test, std::size_t k) {
  if (k == 0) throw ValidationError("LOF needs k >= 1");
  if (k >= static_cast<std::size_t>(train.rows()))
    throw ValidationError("LOF needs more than k=" + std::to_string(k) + " training points");
  if (test.cols() != train.cols()) throw ValidationError("LOF test points have wrong dimension");

  const auto n = static_cast<std::size_t>(train.rows());
  std::vector<std::vector<Neighbour>> train_nbrs(n);
  std::vector<double> k_distance(n);
  for (std::size_t i = 0; i < n; ++i) {
    train_nbrs[i] = knn(train, train.row(static_cast<Eigen::Index>(i)), k, static_cast<Eigen::Index>(i));
    k_distance[i] = train_nbrs[i].back().dist;
  }
  std::vector<double> train_lrd(n);
  for (std::size_t i = 0; i < n; ++i) train_lrd[i] = local_reachability(train_nbrs[i], k_distance);

  Eigen::VectorXd out(test.rows());
  for (Eigen::Index q = 0; q < test.rows(); ++q) {
    const auto nbrs = knn(train, test.row(q), k);
    const double lrd = local_reachability(nbrs, k_distance);
    double ratio = 0.0;
    for (const auto& nb : nbrs) ratio += train_lrd[static_cast<std::size_t>(nb.index)];
    out(q) = ratio / static_cast<double>(k) / lrd;
  }
  return out;
}

double iforest_path_normalizer(double n) {
  if (n <= 1.0) return 0.0;
  if (n <= 2.0) return 1.0;
  return 2.0 * (std::log(n - 1.0) + std::numbers::egamma) - 2.0 * (n - 1.0) / n;
}

namespace {

struct IsoNode {
  Eigen::Index feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  std::size_t size = 0;
  std::unique_ptr<IsoNode> left, right;
};

std::unique_ptr<IsoNode> grow(const Eigen::MatrixXd& data, std::vector<Eigen::Index>& rows, std::size_t begin,
                              std::size_t end, int depth, int max_depth, Rng& rng) {
  auto node = std::make_unique<IsoNode>();
  node->size = end - begin;
  if (node->size <= 1 || depth >= max_depth) return node;

  // Random feature among those that still vary, random cut within its range.
  std::vector<Eigen::Index> features(static_cast<std::size_t>(data.cols()));
  std::iota(features.begin(), features.end(), Eigen::Index{0});
  for (std::size_t remaining = features.size(); remaining > 0; --remaining) {
    std::uniform_int_distribution<std::size_t> pick(0, remaining - 1);
    const std::size_t slot = pick(rng);
    const Eigen::Index f = features[slot];
    std::swap(features[slot], features[remaining - 1]);
    double lo = data(rows[begin], f), hi = lo;
    for (std::size_t i = begin; i < end; ++i) {
      lo = std::min(lo, data(rows[i], f));
      hi = std::max(hi, data(rows[i], f));
    }
    if (lo == hi) continue;
    std::uniform_real_distribution<double> cut(lo, hi);
    node->feature = f;
    node->threshold = cut(rng);
    auto mid = std::partition(rows.begin() + static_cast<std::ptrdiff_t>(begin),
                              rows.begin() + static_cast<std::ptrdiff_t>(end),
                              [&](Eigen::Index r) { return data(r, f) < node->threshold; });
    const auto split = static_cast<std::size_t>(mid - rows.begin());
    node->left = grow(data, rows, begin, split, depth + 1, max_depth, rng);
    node->right = grow(data, rows, split, end, depth + 1, max_depth, rng);
    return node;
  }
  return node;  // every feature constant: unsplittable leaf
}

double path_length(const IsoNode* node, const Eigen::RowVectorXd& x) {
  int depth = 0;
  while (node->feature >= 0) {
    node = x(node->feature) < node->threshold ? node->left.get() : node->right.get();
    ++depth;
  }
  return depth + iforest_path_normalizer(static_cast<double>(node->size));
}

}  // namespace

Eigen::VectorXd iforest_scores(const Eigen::MatrixXd& train, const Eigen::MatrixXd& test, const IForestConfig& config) {
  if (train.rows() == 0) throw ValidationError("isolation forest needs training points");
  if (test.cols() != train.cols()) throw ValidationError("isolation forest test points have wrong dimension");
  if (config.n_trees == 0 || config.subsample == 0) throw ValidationError("invalid isolation forest config");
  const auto n = static_cast<std::size_t>(train.rows());
  const std::size_t psi = std::min(config.subsample, n);
  const int max_depth = static_cast<int>(std::ceil(std::log2(std::max<double>(static_cast<double>(psi), 2.0))));

  Eigen::VectorXd total = Eigen::VectorXd::Zero(test.rows());
  std::vector<Eigen::Index> all(n);
  for (std::size_t t = 0; t < config.n_trees; ++t) {
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(t)));
    std::iota(all.begin(), all.end(), Eigen::Index{0});
    // Partial Fisher-Yates: the first psi entries are a uniform subsample.
    for (std::size_t i = 0; i < psi; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n - 1);
      std::swap(all[i], all[pick(rng)]);
    }
    std::vector<Eigen::Index> rows(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(psi));
    const auto root = grow(train, rows, 0, psi, 0, max_depth, rng);
    for (Eigen::Index q = 0; q < test.rows(); ++q) total(q) += path_length(root.get(), test.row(q));
  }
  const double c = iforest_path_normalizer(static_cast<double>(psi));
  Eigen::VectorXd out(test.rows());
  for (Eigen::Index q = 0; q < test.rows(); ++q) {
    const double mean_h = total(q) / static_cast<double>(config.n_trees);
    out(q) = c > 0 ? std::exp2(-mean_h / c) : 0.5;
  }
  return out;
}

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

std::vector<nn::LayerSpec> encoder_specs(std::size_t in, const VaeConfig& c) {
  return {{in, c.hidden, nn::Activation::leaky_relu}, {c.hidden, 2 * c.latent, nn::Activation::identity}};
}

std::vector<nn::LayerSpec> decoder_specs(std::size_t in, const VaeConfig& c) {
  return {{c.latent, c.hidden, nn::Activation::leaky_relu}, {c.hidden, 2 * in, nn::Activation::identity}};
}

}  // namespace

Vae::Vae(std::size_t input_dim, const VaeConfig& config)
    : input_dim_(input_dim),
      cfg_(config),
      encoder_(encoder_specs(input_dim, config), derive_seed(config.seed, "encoder")),
      decoder_(decoder_specs(input_dim, config), derive_seed(config.seed, "decoder")),
      shift_(Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(input_dim))),
      scale_(Eigen::RowVectorXd::Ones(static_cast<Eigen::Index>(input_dim))),
      rng_(derive_seed(config.seed, "vae")) {
  if (config.latent == 0 || config.hidden == 0 || config.batch == 0 || config.score_samples < 1 ||
      !(config.logvar_bound > 0) || !(config.learning_rate > 0))
    throw ValidationError("invalid VAE config");
}

double Vae::kl_to_standard_normal(const Eigen::VectorXd& mu, const Eigen::VectorXd& logvar) {
  return 0.5 * (mu.array().square() + logvar.array().exp() - 1.0 - logvar.array()).sum();
}

Eigen::MatrixXd Vae::squash(const Eigen::MatrixXd& raw) const {
  const double c = cfg_.logvar_bound;
  return (raw.array() / c).tanh().matrix() * c;
}

double Vae::elbo(const Eigen::MatrixXd& x, const Eigen::MatrixXd& eps, bool backprop) {
  const auto L = static_cast<Eigen::Index>(cfg_.latent), D = static_cast<Eigen::Index>(input_dim_);
  const double B = static_cast<double>(x.rows());
  const double c = cfg_.logvar_bound;

  const Eigen::MatrixXd enc = encoder_.forward(x, nn::Mode::train);
  const Eigen::MatrixXd mu = enc.leftCols(L), raw_lv = enc.rightCols(L);
  const Eigen::MatrixXd lv = squash(raw_lv);
  const Eigen::ArrayXXd sd = (0.5 * lv.array()).exp();
  const Eigen::MatrixXd z = (mu.array() + sd * eps.array()).matrix();

  const Eigen::MatrixXd dec = decoder_.forward(z, nn::Mode::train);
  const Eigen::MatrixXd mux = dec.leftCols(D), raw_lvx = dec.rightCols(D);
  const Eigen::MatrixXd lvx = squash(raw_lvx);
  const Eigen::ArrayXXd inv_var = (-lvx.array()).exp();
  const Eigen::ArrayXXd diff = x.array() - mux.array();

  const double log_lik = -0.5 * (kLog2Pi * static_cast<double>(D) * B + lvx.sum() + (diff.square() * inv_var).sum());
  const double kl = 0.5 * (mu.array().square() + lv.array().exp() - 1.0 - lv.array()).sum();
  const double value = (log_lik - kl) / B;

  if (backprop) {
    // Gradient of -ELBO / B.
    Eigen::MatrixXd d_dec(x.rows(), 2 * D);
    d_dec.leftCols(D) = (-diff * inv_var / B).matrix();
    const Eigen::ArrayXXd d_lvx = 0.5 * (1.0 - diff.square() * inv_var) / B;
    d_dec.rightCols(D) = (d_lvx * (1.0 - (raw_lvx.array() / c).tanh().square())).matrix();
    const Eigen::MatrixXd dz = decoder_.backward(d_dec, true, true);

    Eigen::MatrixXd d_enc(x.rows(), 2 * L);
    d_enc.leftCols(L) = dz + mu / B;
    const Eigen::ArrayXXd d_lv = dz.array() * 0.5 * sd * eps.array() + 0.5 * (lv.array().exp() - 1.0) / B;
    d_enc.rightCols(L) = (d_lv * (1.0 - (raw_lv.array() / c).tanh().square())).matrix();
    encoder_.backward(d_enc, false, true);
  }
  return value;
}

void Vae::zero_grad() {
  encoder_.zero_grad();
  decoder_.zero_grad();
}

void Vae::adam_step() {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  auto params = parameters();
  if (adam_m_.empty())
    for (const auto& p : params) {
      adam_m_.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.size)));
      adam_v_.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.size)));
    }
  ++adam_t_;
  const double step = cfg_.learning_rate * std::sqrt(1.0 - std::pow(b2, adam_t_)) / (1.0 - std::pow(b1, adam_t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto n = static_cast<Eigen::Index>(params[i].size);
    Eigen::Map<Eigen::VectorXd> w(params[i].value, n);
    Eigen::Map<const Eigen::VectorXd> g(params[i].grad, n);
    adam_m_[i] = b1 * adam_m_[i] + (1.0 - b1) * g;
    adam_v_[i] = b2 * adam_v_[i] + (1.0 - b2) * g.cwiseProduct(g);
    w.array() -= step * adam_m_[i].array() / (adam_v_[i].array().sqrt() + eps);
  }
}

std::vector<nn::ParamRef<double>> Vae::parameters() {
  auto p = encoder_.parameters();
  auto q = decoder_.parameters();
  p.insert(p.end(), q.begin(), q.end());
  return p;
}

Eigen::MatrixXd Vae::standardise(const Eigen::MatrixXd& x) const {
  if (x.cols() != static_cast<Eigen::Index>(input_dim_)) throw ValidationError("VAE input has wrong dimension");
  return ((x.rowwise() - shift_).array().rowwise() / scale_.array()).matrix();
}

std::vector<double> Vae::fit(const Eigen::MatrixXd& train) {
  if (train.rows() == 0) throw ValidationError("VAE needs training points");
  if (train.cols() != static_cast<Eigen::Index>(input_dim_)) throw ValidationError("VAE input has wrong dimension");
  shift_ = train.colwise().mean();
  scale_ = (train.rowwise() - shift_).array().square().colwise().mean().sqrt();
  for (auto& s : scale_) s = s > 1e-12 ? s : 1.0;
  const Eigen::MatrixXd x = standardise(train);

  const auto n = static_cast<std::size_t>(x.rows());
  const std::size_t batch = std::min(cfg_.batch, n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> history;
  for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng_);
    double total = 0.0;
    for (std::size_t start = 0; start + batch <= n; start += batch) {
      Eigen::MatrixXd xb(static_cast<Eigen::Index>(batch), x.cols());
      for (std::size_t i = 0; i < batch; ++i) xb.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(order[start + i]));
      Eigen::MatrixXd eps(static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(cfg_.latent));
      for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = normal(rng_);
      zero_grad();
      const double e = elbo(xb, eps, true);
      if (!std::isfinite(e)) throw NumericalError("VAE ELBO became non-finite at epoch " + std::to_string(epoch));
      adam_step();
      total += e * static_cast<double>(batch);
    }
    history.push_back(total / static_cast<double>(n / batch * batch));
  }
  return history;
}

Eigen::VectorXd Vae::score(const Eigen::MatrixXd& points) {
  const Eigen::MatrixXd x = standardise(points);
  const auto L = static_cast<Eigen::Index>(cfg_.latent), D = static_cast<Eigen::Index>(input_dim_);
  const Eigen::MatrixXd enc = encoder_.forward(x, nn::Mode::infer);
  const Eigen::MatrixXd mu = enc.leftCols(L);
  const Eigen::ArrayXXd sd = (0.5 * squash(enc.rightCols(L)).array()).exp();
  Rng rng(derive_seed(cfg_.seed, "score"));
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd total = Eigen::VectorXd::Zero(x.rows());
  for (int s = 0; s < cfg_.score_samples; ++s) {
    Eigen::MatrixXd eps(x.rows(), L);
    for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = normal(rng);
    const Eigen::MatrixXd dec = decoder_.forward((mu.array() + sd * eps.array()).matrix(), nn::Mode::infer);
    const Eigen::ArrayXXd lvx = squash(dec.rightCols(D)).array();
    const Eigen::ArrayXXd diff = x.array() - dec.leftCols(D).array();
    total += (0.5 * (kLog2Pi + lvx + diff.square() * (-lvx).exp())).rowwise().sum().matrix();
  }
  return total / static_cast<double>(cfg_.score_samples);
}

Eigen::VectorXd vae_scores(const Eigen::MatrixXd& train, const Eigen::MatrixXd& test, const VaeConfig& config) {
  Vae vae(static_cast<std::size_t>(train.cols()), config);
  vae.fit(train);
  return vae.score(test);
}

}  // namespace spamdet
