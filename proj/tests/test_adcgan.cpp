#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "spamdet/adcgan.h"
#include "spamdet/error.h"
#include "test_helpers.h"

using namespace spamdet;
using nn::Activation;
using nn::LayerSpec;
using nn::Mlp;

namespace {

Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// Review vectors whose mean depends on which of `groups` conditions produced
// them: condition g is the one-hot genre slot g, vector mean is 3 * e_g.
struct Fixture {
  Eigen::MatrixXd vectors, conditions;
  std::vector<int> group;
};

Fixture conditional_data(int n, int groups, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_int_distribution<int> pick(0, groups - 1);
  std::normal_distribution<double> noise(0.0, 0.5);
  Fixture f;
  f.vectors.resize(n, static_cast<Eigen::Index>(dim));
  f.conditions = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(kConditionDim));
  for (int i = 0; i < n; ++i) {
    const int g = pick(rng);
    f.group.push_back(g);
    for (Eigen::Index k = 0; k < f.vectors.cols(); ++k) f.vectors(i, k) = noise(rng) + (k == g ? 3.0 : 0.0);
    f.conditions(i, cond_slot::genre + g) = 1.0;
    f.conditions(i, cond_slot::region) = 1.0;
  }
  return f;
}

AdcganConfig small_config() {
  AdcganConfig cfg;
  cfg.vector_dim = 8;
  cfg.noise_dim = 8;
  cfg.batch = 32;
  cfg.epochs = 40;
  cfg.seed = 3;
  return cfg;
}

// Wraps conditional_data rows with the user's condition matrix swapped to a
// different group, giving condition-mismatched ("spam") pairs.
Eigen::MatrixXd shifted_conditions(const Fixture& f, int groups) {
  Eigen::MatrixXd c = f.conditions;
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    const int g = f.group[static_cast<std::size_t>(i)];
    c(i, cond_slot::genre + g) = 0.0;
    c(i, cond_slot::genre + (g + 1) % groups) = 1.0;
  }
  return c;
}

}  // namespace

TEST(Architecture, TableCounts) {
  AdcganConfig cfg;
  Mlp<float> G(generator_specs(cfg), 1), D(discriminator_specs(cfg), 2);
  EXPECT_EQ(G.param_count(), 321636u);
  EXPECT_EQ(D.param_count(), 74241u);
  const std::vector<std::size_t> g_rows{33024, 131584, 131328, 25700}, d_rows{33024, 32896, 8256, 65};
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(G.layers()[i].param_count(), g_rows[i]);
    EXPECT_EQ(D.layers()[i].param_count(), d_rows[i]);
  }
  EXPECT_EQ(G.flops(nn::FlopsConvention::two_per_weight), 641024u);
  EXPECT_EQ(D.flops(nn::FlopsConvention::two_per_weight), 147584u);
  EXPECT_EQ(G.flops(nn::FlopsConvention::two_per_weight) + D.flops(nn::FlopsConvention::two_per_weight), 788608u);
  // (2I-1)O drops one addition per output unit.
  EXPECT_EQ(G.flops(nn::FlopsConvention::exact_adds), 641024u - (256 + 512 + 256 + 100));
  EXPECT_EQ(D.flops(nn::FlopsConvention::exact_adds), 147584u - (256 + 128 + 64 + 1));
}

TEST(Generate, OutputDimensionAndZeroNet) {
  AdcganModel m("u", AdcganConfig{});
  auto out = m.generate(gaussian(3, 100, 1), Eigen::MatrixXd::Zero(3, 28));
  EXPECT_EQ(out.cols(), 100);
  for (auto& l : m.generator().layers()) {
    l.weights().setZero();
    l.bias().setZero();
  }
  EXPECT_EQ(m.generate(gaussian(3, 100, 2), Eigen::MatrixXd::Ones(3, 28)), Eigen::MatrixXd::Zero(3, 100));
  EXPECT_THROW(m.generate(gaussian(3, 99, 2), Eigen::MatrixXd::Ones(3, 28)), ValidationError);
}

TEST(Discriminate, RangeAndDeterminism) {
  AdcganModel m("u", AdcganConfig{});
  Eigen::MatrixXd v = gaussian(50, 100, 3) * 10.0, c = gaussian(50, 28, 4);
  auto p = m.discriminate(v, c);
  EXPECT_GT(p.minCoeff(), 0.0);
  EXPECT_LT(p.maxCoeff(), 1.0);
  EXPECT_EQ(p, m.discriminate(v, c));
  EXPECT_THROW(m.discriminate(v, gaussian(50, 27, 4)), ValidationError);
}

TEST(Losses, GeneratorLossExtremes) {
  Mlp<double> G({{6, 5, Activation::identity}}, 1);
  Mlp<double> D({{5 + 2, 1, Activation::sigmoid}}, 2);
  Eigen::MatrixXd z = gaussian(4, 4, 5), cg = gaussian(4, 2, 6);
  D.layers()[0].weights().setZero();
  D.layers()[0].bias().setConstant(0.0);
  EXPECT_DOUBLE_EQ(generator_loss(G, D, z, cg, false), -0.5);
  D.layers()[0].bias().setConstant(50.0);
  EXPECT_DOUBLE_EQ(generator_loss(G, D, z, cg, false), -1.0);
}

TEST(Losses, DiscriminatorLossExtremes) {
  Mlp<double> D({{3, 1, Activation::sigmoid}}, 2);
  D.layers()[0].weights() << 1.0, 0.0, 0.0;
  D.layers()[0].bias().setZero();
  Eigen::MatrixXd real = gaussian(5, 3, 7), fake = gaussian(6, 3, 8);
  real.col(0).setConstant(100.0);
  fake.col(0).setConstant(-100.0);
  EXPECT_NEAR(discriminator_loss(D, real, fake, false), -1.0, 1e-12);
  D.layers()[0].weights().setZero();
  EXPECT_DOUBLE_EQ(discriminator_loss(D, real, fake, false), 0.0);
  const double mid = discriminator_loss(D, real, fake, false);
  EXPECT_GT(mid, -1.0);
  EXPECT_LT(mid, 1.0);
}

TEST(Losses, DiscriminatorGradientMatchesFiniteDifferences) {
  Mlp<double> D({{10, 16, Activation::leaky_relu, 0.3, false},
                 {16, 8, Activation::leaky_relu, 0.3, false},
                 {8, 1, Activation::sigmoid}},
                11);
  Eigen::MatrixXd real = gaussian(7, 10, 12), fake = gaussian(9, 10, 13);
  discriminator_loss(D, real, fake, false);
  D.set_mask_replay(true);
  D.zero_grad();
  discriminator_loss(D, real, fake, true);
  auto res = check_gradients(D.parameters(), [&] { return discriminator_loss(D, real, fake, false); });
  EXPECT_EQ(res.checked, D.trainable_param_count());
  EXPECT_GE(res.pass_fraction(), 0.99) << "max rel error " << res.max_relative_error;
}

TEST(Losses, GeneratorGradientThroughFrozenDiscriminator) {
  Mlp<double> G({{6 + 3, 12, Activation::leaky_relu, 0.0, true}, {12, 5, Activation::identity}}, 21);
  Mlp<double> D({{5 + 3, 10, Activation::leaky_relu, 0.3, false}, {10, 1, Activation::sigmoid}}, 22);
  Eigen::MatrixXd z = gaussian(8, 6, 23), cg = gaussian(8, 3, 24);
  generator_loss(G, D, z, cg, false);
  D.set_mask_replay(true);
  D.zero_grad();
  G.zero_grad();
  generator_loss(G, D, z, cg, true);
  auto d_grad = D.layers()[0].weight_grad();
  auto res = check_gradients(G.parameters(), [&] { return generator_loss(G, D, z, cg, false); });
  EXPECT_EQ(res.checked, G.trainable_param_count());
  EXPECT_GE(res.pass_fraction(), 0.99) << "max rel error " << res.max_relative_error;
  EXPECT_TRUE(d_grad.isZero(0.0));  // D's parameters are frozen in the generator step
}

TEST(Train, DeterministicForSeed) {
  auto f = conditional_data(100, 4, 8, 1);
  AdcganModel a("u", small_config()), b("u", small_config());
  a.train(f.vectors, f.conditions);
  b.train(f.vectors, f.conditions);
  EXPECT_EQ(a.discriminator().layers()[0].weights(), b.discriminator().layers()[0].weights());
  EXPECT_EQ(a.generator().layers()[2].weights(), b.generator().layers()[2].weights());
  EXPECT_EQ(a.history().loss_g, b.history().loss_g);
  ASSERT_EQ(a.history().loss_d.size(), 40u);
  for (double l : a.history().loss_d) {
    EXPECT_GT(l, -1.0);
    EXPECT_LT(l, 1.0);
  }
}

TEST(Train, FakesNeverPairedWithTheirOwnCondition) {
  auto f = conditional_data(200, 6, 8, 2);
  AdcganModel m("u", small_config());
  std::size_t batches = 0, reported = 0;
  m.train(f.vectors, f.conditions, [&](const DiscriminatorBatch& b) {
    ++batches;
    std::size_t same = 0;
    for (Eigen::Index r = 0; r < b.cg->rows(); ++r)
      if (b.cg->row(r) == b.cd->row(r)) ++same;
    EXPECT_EQ(same, b.collisions) << "epoch " << b.epoch;
    reported += b.collisions;
  });
  EXPECT_EQ(batches, 40u);
  // Six conditions, ten redraws: a surviving collision has chance (1/6)^11 per row.
  EXPECT_EQ(reported, 0u);
}

TEST(Train, Errors) {
  AdcganModel m("u", small_config());
  EXPECT_THROW(m.train(Eigen::MatrixXd(0, 8), Eigen::MatrixXd(0, 28)), ValidationError);
  EXPECT_THROW(m.score(Eigen::MatrixXd::Zero(1, 8), Eigen::MatrixXd::Zero(1, 28)), ValidationError);
  spamdet::testing::WarningCapture warnings;
  auto f = conditional_data(20, 2, 8, 3);
  auto cfg = small_config();
  cfg.epochs = 1;
  AdcganModel tiny("u", cfg);
  tiny.train(f.vectors, f.conditions);
  EXPECT_FALSE(warnings.messages.empty());
}

class TrainedModel : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    auto cfg = small_config();
    cfg.epochs = 1500;
    cfg.batch = 64;
    train_ = new Fixture(conditional_data(400, 4, 8, 10));
    model_ = new AdcganModel("u", cfg);
    model_->train(train_->vectors, train_->conditions);
  }
  static void TearDownTestSuite() {
    delete model_;
    delete train_;
  }
  static AdcganModel* model_;
  static Fixture* train_;
};

AdcganModel* TrainedModel::model_ = nullptr;
Fixture* TrainedModel::train_ = nullptr;

TEST_F(TrainedModel, MatchedPairsOutscoreMismatchedOnHeldOutData) {
  auto held = conditional_data(400, 4, 8, 11);
  const double matched = model_->discriminate(held.vectors, held.conditions).mean();
  const double mismatched = model_->discriminate(held.vectors, shifted_conditions(held, 4)).mean();
  EXPECT_GT(matched - mismatched, 0.2) << matched << " vs " << mismatched;
  auto spam = model_->score(held.vectors, shifted_conditions(held, 4));
  auto normal = model_->score(held.vectors, held.conditions);
  EXPECT_GT(spam.mean(), normal.mean());
}

TEST_F(TrainedModel, RealPairsOutscoreGeneratedMismatchedPairs) {
  auto held = conditional_data(400, 4, 8, 12);
  Eigen::MatrixXd z = gaussian(400, 8, 13);
  // generate() works in the model's standardised space; discriminate() expects
  // raw vectors, so compare in standardised space via a zero/unit round trip.
  const Eigen::MatrixXd fake_std = model_->generate(z, held.conditions);
  const Eigen::VectorXd mean = train_->vectors.colwise().mean();
  const Eigen::VectorXd sd =
      ((train_->vectors.rowwise() - mean.transpose()).array().square().colwise().mean().sqrt()).transpose();
  Eigen::MatrixXd fake = (fake_std.array().rowwise() * sd.transpose().array()).matrix();
  fake.rowwise() += mean.transpose();
  const double real_d = model_->discriminate(held.vectors, held.conditions).mean();
  const double fake_d = model_->discriminate(fake, shifted_conditions(held, 4)).mean();
  EXPECT_GT(real_d, fake_d);
}

TEST_F(TrainedModel, GeneratorRespondsToCondition) {
  Eigen::MatrixXd z = gaussian(1, 8, 14);
  Eigen::MatrixXd c1 = train_->conditions.row(0), c2 = shifted_conditions(*train_, 4).row(0);
  EXPECT_GT((model_->generate(z, c1) - model_->generate(z, c2)).norm(), 0.0);
}

TEST_F(TrainedModel, GeneratorLossTrendsDown) {
  const auto& lg = model_->history().loss_g;
  auto window_mean = [&](std::size_t from, std::size_t to) {
    double s = 0;
    for (std::size_t i = from; i < to; ++i) s += lg[i];
    return s / static_cast<double>(to - from);
  };
  // Early epochs: D rejects everything easily; later G closes part of the gap.
  EXPECT_LT(window_mean(lg.size() - 100, lg.size()), window_mean(0, 100));
}

TEST_F(TrainedModel, SaveLoadRoundTrip) {
  std::stringstream buf;
  model_->save(buf);
  auto back = AdcganModel::load(buf);
  auto held = conditional_data(50, 4, 8, 15);
  EXPECT_EQ(back.score(held.vectors, held.conditions), model_->score(held.vectors, held.conditions));
  EXPECT_EQ(back.user_id(), "u");
  EXPECT_EQ(back.catalogue_hash(), Catalogue::standard().hash());
  EXPECT_EQ(back.config().hash(), model_->config().hash());
  std::stringstream garbage("SDGMxxxx");
  EXPECT_THROW(AdcganModel::load(garbage), ValidationError);
}

TEST_F(TrainedModel, DetectExtremes) {
  auto held = conditional_data(50, 4, 8, 16);
  auto s = model_->score(held.vectors, held.conditions);
  for (auto l : detect(s, 0.0)) EXPECT_EQ(l, Label::deceptive);
  for (auto l : detect(s, 1.0)) EXPECT_EQ(l, Label::truthful);
  EXPECT_DOUBLE_EQ(model_->score_review(held.vectors.row(0).transpose(), held.conditions.row(0).transpose()), s(0));
}

TEST(AdcganConfig, JsonRejectsUnknownKeys) {
  AdcganConfig cfg;
  cfg.lr_d = 0.005;
  auto back = AdcganConfig::from_json(cfg.to_json());
  EXPECT_EQ(back.hash(), cfg.hash());
  auto j = cfg.to_json();
  j["learning_rate"] = 0.1;
  EXPECT_THROW(AdcganConfig::from_json(j), ValidationError);
}
