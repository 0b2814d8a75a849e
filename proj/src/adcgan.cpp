#include "spamdet/adcgan.h"

#include <cmath>
#include <fstream>
#include <set>
#include <tuple>
#include <utility>

#include "spamdet/binary_io.h"
#include "spamdet/error.h"
#include "spamdet/log.h"

namespace spamdet {

namespace {

constexpr char kModelMagic[5] = "SDGM";
constexpr std::uint32_t kModelVersion = 1;

template <typename T>
using Mat = Eigen::Matrix<T, -1, -1>;

Eigen::MatrixXf hcat(const Eigen::MatrixXf& a, const Eigen::MatrixXf& b) {
  Eigen::MatrixXf out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

Eigen::MatrixXf gather_rows(const Eigen::MatrixXf& m, const std::vector<std::size_t>& idx) {
  Eigen::MatrixXf out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

// Generator step given that G's last train-mode forward produced `fake` from
// conditions `cg`. Returns loss_g.
template <typename T>
T generator_step(nn::Mlp<T>& G, nn::Mlp<T>& D, const Mat<T>& fake, const Mat<T>& cg, bool backprop) {
  Mat<T> in(fake.rows(), fake.cols() + cg.cols());
  in << fake, cg;
  const Mat<T> out = D.forward(in, nn::Mode::train);
  const T loss = -out.mean();
  if (backprop) {
    const Mat<T> up = Mat<T>::Constant(out.rows(), 1, T(-1) / static_cast<T>(out.rows()));
    const Mat<T> d_in = D.backward(up, true, false);
    G.backward(d_in.leftCols(fake.cols()), false, true);
  }
  return loss;
}

// Mean D over the real rows and over the fake rows.
template <typename T>
std::pair<T, T> discriminator_pass(nn::Mlp<T>& D, const Mat<T>& real_in, const Mat<T>& fake_in, bool backprop) {
  if (real_in.rows() == 0 || fake_in.rows() == 0) throw ValidationError("empty discriminator batch");
  if (real_in.cols() != fake_in.cols()) throw ValidationError("real and fake batches differ in width");
  // D has no batch statistics, so one stacked pass equals two separate passes.
  Mat<T> in(real_in.rows() + fake_in.rows(), real_in.cols());
  in << real_in, fake_in;
  const Mat<T> out = D.forward(in, nn::Mode::train);
  if (backprop) {
    Mat<T> up(out.rows(), 1);
    up.topRows(real_in.rows()).setConstant(T(-1) / static_cast<T>(real_in.rows()));
    up.bottomRows(fake_in.rows()).setConstant(T(1) / static_cast<T>(fake_in.rows()));
    D.backward(up, false, true);
  }
  return {out.topRows(real_in.rows()).mean(), out.bottomRows(fake_in.rows()).mean()};
}

const std::set<std::string>& config_keys() {
  static const std::set<std::string> keys{"noise_dim", "vector_dim",  "condition_dim", "batch",
                                          "epochs",    "lr_g",        "lr_d",          "d_steps_per_g",
                                          "d_dropout", "g_batchnorm", "weight_clip",   "standardize",
                                          "seed"};
  return keys;
}

}  // namespace

nlohmann::json AdcganConfig::to_json() const {
  return {{"noise_dim", noise_dim}, {"vector_dim", vector_dim},   {"condition_dim", condition_dim},
          {"batch", batch},         {"epochs", epochs},           {"lr_g", lr_g},
          {"lr_d", lr_d},           {"d_steps_per_g", d_steps_per_g}, {"d_dropout", d_dropout},
          {"g_batchnorm", g_batchnorm}, {"weight_clip", weight_clip}, {"standardize", standardize},
          {"seed", seed}};
}

AdcganConfig AdcganConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("gan config must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!config_keys().count(it.key())) throw ValidationError("unknown gan config key '" + it.key() + "'");
  AdcganConfig c;
  c.noise_dim = j.value("noise_dim", c.noise_dim);
  c.vector_dim = j.value("vector_dim", c.vector_dim);
  c.condition_dim = j.value("condition_dim", c.condition_dim);
  c.batch = j.value("batch", c.batch);
  c.epochs = j.value("epochs", c.epochs);
  c.lr_g = j.value("lr_g", c.lr_g);
  c.lr_d = j.value("lr_d", c.lr_d);
  c.d_steps_per_g = j.value("d_steps_per_g", c.d_steps_per_g);
  c.d_dropout = j.value("d_dropout", c.d_dropout);
  c.g_batchnorm = j.value("g_batchnorm", c.g_batchnorm);
  c.weight_clip = j.value("weight_clip", c.weight_clip);
  c.standardize = j.value("standardize", c.standardize);
  c.seed = j.value("seed", c.seed);
  if (c.batch == 0 || c.epochs < 0 || c.d_steps_per_g < 1 || !(c.lr_g > 0) || !(c.lr_d > 0))
    throw ValidationError("invalid gan config");
  if (c.d_dropout < 0 || c.d_dropout >= 1) throw ValidationError("d_dropout must be in [0, 1)");
  return c;
}

std::uint64_t AdcganConfig::hash() const { return fnv1a64(to_json().dump()); }

std::vector<nn::LayerSpec> generator_specs(const AdcganConfig& cfg) {
  using nn::Activation;
  const std::size_t in = cfg.noise_dim + cfg.condition_dim;
  return {{in, 256, Activation::leaky_relu, 0.0, cfg.g_batchnorm},
          {256, 512, Activation::leaky_relu, 0.0, cfg.g_batchnorm},
          {512, 256, Activation::leaky_relu, 0.0, cfg.g_batchnorm},
          {256, cfg.vector_dim, Activation::identity, 0.0, false}};
}

std::vector<nn::LayerSpec> discriminator_specs(const AdcganConfig& cfg) {
  using nn::Activation;
  const std::size_t in = cfg.vector_dim + cfg.condition_dim;
  return {{in, 256, Activation::leaky_relu, cfg.d_dropout, false},
          {256, 128, Activation::leaky_relu, cfg.d_dropout, false},
          {128, 64, Activation::leaky_relu, cfg.d_dropout, false},
          {64, 1, Activation::sigmoid, 0.0, false}};
}

template <typename T>
T discriminator_loss(nn::Mlp<T>& D, const Mat<T>& real_in, const Mat<T>& fake_in, bool backprop) {
  const auto [real_mean, fake_mean] = discriminator_pass(D, real_in, fake_in, backprop);
  return fake_mean - real_mean;
}

template <typename T>
T generator_loss(nn::Mlp<T>& G, nn::Mlp<T>& D, const Mat<T>& z, const Mat<T>& cg, bool backprop) {
  if (z.rows() == 0 || z.rows() != cg.rows()) throw ValidationError("noise and condition batches differ in size");
  Mat<T> in(z.rows(), z.cols() + cg.cols());
  in << z, cg;
  const Mat<T> fake = G.forward(in, nn::Mode::train);
  return generator_step(G, D, fake, cg, backprop);
}

template float discriminator_loss<float>(nn::Mlp<float>&, const Eigen::MatrixXf&, const Eigen::MatrixXf&, bool);
template double discriminator_loss<double>(nn::Mlp<double>&, const Eigen::MatrixXd&, const Eigen::MatrixXd&, bool);
template float generator_loss<float>(nn::Mlp<float>&, nn::Mlp<float>&, const Eigen::MatrixXf&, const Eigen::MatrixXf&,
                                     bool);
template double generator_loss<double>(nn::Mlp<double>&, nn::Mlp<double>&, const Eigen::MatrixXd&,
                                       const Eigen::MatrixXd&, bool);

AdcganModel::AdcganModel(std::string user_id, const AdcganConfig& cfg, std::uint64_t catalogue_hash)
    : user_id_(std::move(user_id)),
      cfg_(cfg),
      catalogue_hash_(catalogue_hash),
      G_(generator_specs(cfg), derive_seed(cfg.seed, "generator")),
      D_(discriminator_specs(cfg), derive_seed(cfg.seed, "discriminator")),
      shift_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cfg.vector_dim))),
      scale_(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(cfg.vector_dim))) {}

Eigen::MatrixXf AdcganModel::prepare_vectors(const Eigen::MatrixXd& vectors) const {
  if (vectors.cols() != static_cast<Eigen::Index>(cfg_.vector_dim))
    throw ValidationError("review vectors have " + std::to_string(vectors.cols()) + " columns, model expects " +
                          std::to_string(cfg_.vector_dim));
  return ((vectors.rowwise() - shift_.transpose()).array().rowwise() / scale_.transpose().array())
      .matrix()
      .cast<float>();
}

void AdcganModel::train(const Eigen::MatrixXd& vectors, const Eigen::MatrixXd& conditions,
                        const DiscriminatorBatchHook& hook) {
  if (vectors.rows() == 0) throw ValidationError("user " + user_id_ + " has no training reviews");
  if (vectors.rows() != conditions.rows()) throw ValidationError("vector and condition counts differ");
  if (conditions.cols() != static_cast<Eigen::Index>(cfg_.condition_dim))
    throw ValidationError("conditions have wrong width");
  if (static_cast<std::size_t>(vectors.rows()) < 2 * cfg_.batch)
    warn("user " + user_id_ + " has " + std::to_string(vectors.rows()) + " training pairs, fewer than two batches");

  if (cfg_.standardize) {
    shift_ = vectors.colwise().mean().transpose();
    scale_ = ((vectors.rowwise() - shift_.transpose()).array().square().colwise().mean().sqrt()).transpose();
    for (auto& s : scale_) s = s > 1e-12 ? s : 1.0;
  }
  const Eigen::MatrixXf X = prepare_vectors(vectors);
  const Eigen::MatrixXf C = conditions.cast<float>();
  const ConditionSampler sampler(conditions);

  Rng rng(derive_seed(cfg_.seed, "train"));
  std::normal_distribution<float> normal(0.0f, 1.0f);
  const auto B = static_cast<Eigen::Index>(cfg_.batch);
  const auto lr_g = static_cast<float>(cfg_.lr_g), lr_d = static_cast<float>(cfg_.lr_d);
  history_ = {};

  Eigen::MatrixXf z(B, static_cast<Eigen::Index>(cfg_.noise_dim)), cg, fake;
  for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
    float loss_d = 0, d_real = 0, d_fake = 0;
    for (int step = 0; step < cfg_.d_steps_per_g; ++step) {
      cg = gather_rows(C, sampler.sample(cfg_.batch, rng).indices);
      for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = normal(rng);
      fake = G_.forward(hcat(z, cg), nn::Mode::train);

      const auto real = sampler.sample_mismatched(cg.cast<double>(), rng);
      const Eigen::MatrixXf cd = gather_rows(C, real.indices);
      if (hook) hook({epoch, &cg, &cd, real.collisions});

      D_.zero_grad();
      std::tie(d_real, d_fake) = discriminator_pass(D_, hcat(gather_rows(X, real.indices), cd), hcat(fake, cd), true);
      loss_d = d_fake - d_real;
      D_.sgd_step(lr_d);
      if (cfg_.weight_clip > 0) D_.clip_weights(static_cast<float>(cfg_.weight_clip));
    }
    // G is unchanged since it produced `fake`, so its caches are reused.
    G_.zero_grad();
    const float loss_g = generator_step(G_, D_, fake, cg, true);
    if (!std::isfinite(loss_g) || !std::isfinite(loss_d))
      throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + " for user " + user_id_);
    G_.sgd_step(lr_g);
    if (cfg_.weight_clip > 0) G_.clip_weights(static_cast<float>(cfg_.weight_clip));

    history_.loss_g.push_back(loss_g);
    history_.loss_d.push_back(loss_d);
    history_.d_real.push_back(d_real);
    history_.d_fake.push_back(d_fake);
  }
  trained_ = true;
}

Eigen::MatrixXd AdcganModel::generate(const Eigen::MatrixXd& z, const Eigen::MatrixXd& cg) {
  if (z.cols() != static_cast<Eigen::Index>(cfg_.noise_dim) || cg.cols() != static_cast<Eigen::Index>(cfg_.condition_dim) ||
      z.rows() != cg.rows())
    throw ValidationError("noise/condition dimensions do not match the generator");
  return G_.forward(hcat(z.cast<float>(), cg.cast<float>()), nn::Mode::infer).cast<double>();
}

Eigen::VectorXd AdcganModel::discriminate(const Eigen::MatrixXd& vectors, const Eigen::MatrixXd& conditions) {
  if (conditions.cols() != static_cast<Eigen::Index>(cfg_.condition_dim) || vectors.rows() != conditions.rows())
    throw ValidationError("condition dimensions do not match the discriminator");
  const Eigen::MatrixXf out = D_.forward(hcat(prepare_vectors(vectors), conditions.cast<float>()), nn::Mode::infer);
  return out.col(0).cast<double>();
}

Eigen::VectorXd AdcganModel::score(const Eigen::MatrixXd& vectors, const Eigen::MatrixXd& conditions) {
  if (!trained_) throw ValidationError("model for user " + user_id_ + " is untrained");
  return (1.0 - discriminate(vectors, conditions).array()).matrix();
}

double AdcganModel::score_review(const Eigen::VectorXd& vector, const Eigen::VectorXd& condition) {
  return score(vector.transpose(), condition.transpose())(0);
}

void AdcganModel::save(std::ostream& out) const {
  if (!trained_) throw ValidationError("refusing to save an untrained model");
  bin::write_magic(out, kModelMagic);
  bin::write<std::uint32_t>(out, kModelVersion);
  bin::write_string(out, user_id_);
  bin::write<std::uint64_t>(out, catalogue_hash_);
  bin::write<std::uint64_t>(out, cfg_.hash());
  bin::write_string(out, cfg_.to_json().dump());
  bin::write<std::uint32_t>(out, static_cast<std::uint32_t>(shift_.size()));
  for (double v : shift_) bin::write<double>(out, v);
  for (double v : scale_) bin::write<double>(out, v);
  G_.save(out);
  D_.save(out);
}

AdcganModel AdcganModel::load(std::istream& in) {
  bin::expect_magic(in, kModelMagic, "adcgan model");
  if (bin::read<std::uint32_t>(in) != kModelVersion) throw ValidationError("unsupported model version");
  AdcganModel m;
  m.user_id_ = bin::read_string(in);
  m.catalogue_hash_ = bin::read<std::uint64_t>(in);
  const auto cfg_hash = bin::read<std::uint64_t>(in);
  m.cfg_ = AdcganConfig::from_json(nlohmann::json::parse(bin::read_string(in)));
  if (m.cfg_.hash() != cfg_hash) throw ValidationError("model config hash does not match its config");
  const auto dim = bin::read<std::uint32_t>(in);
  if (dim != m.cfg_.vector_dim) throw ValidationError("model standardisation has wrong dimension");
  m.shift_.resize(dim);
  m.scale_.resize(dim);
  for (auto& v : m.shift_) v = bin::read<double>(in);
  for (auto& v : m.scale_) v = bin::read<double>(in);
  m.G_ = nn::Mlp<float>::load(in);
  m.D_ = nn::Mlp<float>::load(in);
  if (m.G_.specs().size() != generator_specs(m.cfg_).size() || m.D_.input_dim() != m.cfg_.vector_dim + m.cfg_.condition_dim)
    throw ValidationError("model networks do not match its config");
  m.trained_ = true;
  return m;
}

void AdcganModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  save(out);
}

AdcganModel AdcganModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("model file " + path + " not found", "train");
  return load(in);
}

std::vector<Label> detect(const Eigen::VectorXd& scores, double threshold) {
  std::vector<Label> out;
  out.reserve(static_cast<std::size_t>(scores.size()));
  for (double s : scores) out.push_back(s >= threshold ? Label::deceptive : Label::truthful);
  return out;
}

}  // namespace spamdet
