#include <gtest/gtest.h>

#include <cmath>

#include "spamdet/embed_sentence.h"
#include "spamdet/error.h"
#include "spamdet/random.h"
#include "test_helpers.h"

using namespace spamdet;

namespace {

Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// Tiny hand-made setup: vocabulary {the, plot, music, film} with counts 4,2,1,1
// and orthogonal embeddings.
struct Toy {
  Vocabulary vocab = build_vocab({{"the", "the", "the", "the", "plot", "plot", "music", "film"}}, 1);
  WordEmbeddings emb;
  SifConfig cfg;
  Toy() {
    emb.vectors = Eigen::MatrixXd::Identity(4, 4);
    cfg.dim = 4;
    cfg = resolve_sif_config(cfg, vocab);
  }
  Eigen::VectorXd unit(const std::string& w) const { return emb.row(*vocab.id(w)); }
};

}  // namespace

TEST(FeatureWords, StandardListHasFiveSeedsPerAspect) {
  auto f = FeatureWordList::standard();
  EXPECT_EQ(f.size(), 20u);
  for (Aspect a : kAspects) EXPECT_EQ(f.words(a).size(), 5u);
  EXPECT_EQ(f.aspect_of("soundtrack"), Aspect::sound_effect);
  EXPECT_EQ(f.aspect_of("scenery"), Aspect::visual_effect);
  EXPECT_EQ(f.aspect_of("cast"), Aspect::acting_skill);
  EXPECT_EQ(f.aspect_of("logic"), Aspect::plot);
  EXPECT_FALSE(f.contains("popcorn"));
}

TEST(FeatureWords, JsonRoundTrip) {
  auto f = FeatureWordList::standard();
  f.add("storyline", Aspect::plot, WordOrigin::expanded);
  auto back = FeatureWordList::from_json(f.to_json());
  EXPECT_EQ(back, f);
  EXPECT_EQ(back.words(Aspect::plot).back().origin, WordOrigin::expanded);
  auto bad = f.to_json();
  bad["lighting"] = nlohmann::json::array();
  EXPECT_THROW(FeatureWordList::from_json(bad), ValidationError);
}

TEST(FeatureWords, NoDuplicatesAcrossAspects) {
  FeatureWordList f;
  EXPECT_TRUE(f.add("theme", Aspect::sound_effect, WordOrigin::base));
  EXPECT_FALSE(f.add("theme", Aspect::plot, WordOrigin::expanded));
  EXPECT_EQ(f.aspect_of("theme"), Aspect::sound_effect);
}

class Expansion : public ::testing::Test {
 protected:
  void SetUp() override {
    // "storyline" fills exactly the slots "plot" fills; fillers are many and rare.
    Rng rng(31);
    std::uniform_int_distribution<int> ctx(0, 3), filler(0, 59), coin(0, 1);
    std::vector<std::vector<std::string>> corpus;
    for (int i = 0; i < 1500; ++i) {
      std::vector<std::string> s;
      s.push_back("k" + std::to_string(ctx(rng)));
      s.push_back(coin(rng) ? "plot" : "storyline");
      s.push_back("k" + std::to_string(ctx(rng)));
      s.push_back("f" + std::to_string(filler(rng)));
      s.push_back("m" + std::to_string(ctx(rng)));
      s.push_back("music");
      s.push_back("m" + std::to_string(ctx(rng)));
      corpus.push_back(s);
    }
    vocab = build_vocab(corpus, 1);
    std::vector<std::vector<TokenId>> ids;
    for (const auto& s : corpus) ids.push_back(vocab.encode(s));
    SkipGramConfig cfg;
    cfg.dim = 30;
    cfg.seed = 2;
    emb = train_skipgram(ids, vocab, cfg);
  }

  Vocabulary vocab;
  WordEmbeddings emb;
};

TEST_F(Expansion, CoOccurringWordJoinsPlot) {
  spamdet::testing::WarningCapture quiet;  // most seeds are absent from this corpus
  ExpansionConfig cfg;
  cfg.k_per_seed = 3;
  auto out = expand_feature_words(FeatureWordList::standard(), emb, vocab, cfg);
  EXPECT_EQ(out.aspect_of("storyline"), Aspect::plot);
  EXPECT_EQ(out.words(Aspect::plot).back().origin, WordOrigin::expanded);
  EXPECT_FALSE(quiet.messages.empty());
}

TEST_F(Expansion, ZeroNeighboursKeepsBase) {
  ExpansionConfig cfg;
  cfg.k_per_seed = 0;
  EXPECT_EQ(expand_feature_words(FeatureWordList::standard(), emb, vocab, cfg), FeatureWordList::standard());
}

TEST_F(Expansion, RareNeighbourExcluded) {
  spamdet::testing::WarningCapture quiet;
  ExpansionConfig cfg;
  cfg.k_per_seed = 3;
  // Only the single most frequent token qualifies; "storyline" ranks below it.
  cfg.freq_quantile = 1.0 / static_cast<double>(vocab.size());
  ASSERT_GT(*vocab.id("storyline"), 0);
  auto out = expand_feature_words(FeatureWordList::standard(), emb, vocab, cfg);
  EXPECT_FALSE(out.contains("storyline"));
}

TEST(ExpansionErrors, EmptyEmbeddingRejected) {
  Vocabulary v = build_vocab({{"plot"}}, 1);
  EXPECT_THROW(expand_feature_words(FeatureWordList::standard(), WordEmbeddings{}, v), ValidationError);
}

TEST(SifWeight, HandValues) {
  SifConfig cfg;
  cfg.z = 10000.0;
  EXPECT_EQ(sif_weight(0.3, cfg, true), 1.0);
  EXPECT_EQ(sif_weight(1e-9, cfg, true), 1.0);
  cfg.z = 1000.0;
  EXPECT_NEAR(sif_weight(1e-3, cfg, false), 0.05, 1e-15);
  cfg.z = 10000.0;
  EXPECT_NEAR(sif_weight(1e-3, cfg, false), 0.05 / 9.55, 1e-12);
  EXPECT_NEAR(sif_weight(1e-3, cfg, false), 0.0052356, 1e-7);
  EXPECT_THROW(sif_weight(0.0, cfg, false), ValidationError);
  EXPECT_THROW(sif_weight(-0.1, cfg, true), ValidationError);
}

TEST(SifWeight, NonIncreasingInProbability) {
  SifConfig cfg;
  cfg.z = 5000.0;
  double prev = sif_weight(1e-7, cfg, false);
  for (double p = 2e-7; p <= 1.0; p *= 1.5) {
    const double w = sif_weight(p, cfg, false);
    EXPECT_LE(w, prev);
    prev = w;
  }
}

TEST(SifConfig, ZDefaultsToVocabularySize) {
  Toy t;
  EXPECT_EQ(t.cfg.z, 4.0);
  SifConfig bad;
  bad.alpha = 1.0;
  EXPECT_THROW(resolve_sif_config(bad, t.vocab), ValidationError);
}

TEST(EmbedRaw, SingleWordIsWeightedVector) {
  Toy t;
  auto v = embed_raw({"the"}, t.emb, t.vocab, FeatureWordList::standard(), t.cfg);
  const double w = sif_weight(0.5, t.cfg, false);
  EXPECT_LT((v - w * t.unit("the")).norm(), 1e-15);
}

TEST(EmbedRaw, RepeatedWordEqualsSingle) {
  Toy t;
  auto f = FeatureWordList::standard();
  EXPECT_LT((embed_raw({"film", "film"}, t.emb, t.vocab, f, t.cfg) - embed_raw({"film"}, t.emb, t.vocab, f, t.cfg))
                .norm(),
            1e-15);
}

TEST(EmbedRaw, FeatureWordOutweighsCommonWord) {
  Toy t;
  // "plot" and "the" have Z p > 1 (Z = 4, p = 0.25 and 0.5).
  ASSERT_GT(t.cfg.z * t.vocab.probability(*t.vocab.id("plot")), 1.0 - 1e-12);
  auto v = embed_raw({"plot", "the"}, t.emb, t.vocab, FeatureWordList::standard(), t.cfg);
  const double plot_part = v.dot(t.unit("plot")), the_part = v.dot(t.unit("the"));
  EXPECT_GT(plot_part, the_part);
  EXPECT_DOUBLE_EQ(plot_part, 0.5);
  // Without attention "plot" is an ordinary word.
  auto plain = embed_raw({"plot", "the"}, t.emb, t.vocab, FeatureWordList::standard(), t.cfg, false);
  EXPECT_DOUBLE_EQ(plain.dot(t.unit("plot")), 0.5 * sif_weight(0.25, t.cfg, false));
}

TEST(EmbedRaw, OutOfVocabularySkippedOrRejected) {
  Toy t;
  auto f = FeatureWordList::standard();
  EXPECT_LT((embed_raw({"zzz", "music"}, t.emb, t.vocab, f, t.cfg) - embed_raw({"music"}, t.emb, t.vocab, f, t.cfg))
                .norm(),
            1e-15);
  EXPECT_THROW(embed_raw({"zzz"}, t.emb, t.vocab, f, t.cfg), ValidationError);
  EXPECT_THROW(embed_raw({}, t.emb, t.vocab, f, t.cfg), ValidationError);
}

TEST(CommonComponent, IdenticalVectorsCollapseToZero) {
  Eigen::MatrixXd rows(5, 3);
  rows.rowwise() = Eigen::RowVector3d(1.0, -2.0, 0.5);
  auto out = remove_common_component(rows);
  EXPECT_LT(out.vectors.cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(out.u.norm(), 1.0, 1e-12);
}

TEST(CommonComponent, MatchesDenseEigenSolver) {
  Eigen::MatrixXd rows = gaussian(50, 100, 41);
  auto out = remove_common_component(rows);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(rows.transpose() * rows);
  Eigen::VectorXd top = solver.eigenvectors().col(99);  // eigenvalues ascend
  const double sign = top.dot(out.u) < 0 ? -1.0 : 1.0;
  EXPECT_LT((out.u - sign * top).norm(), 1e-6);
  EXPECT_LT((out.vectors * out.u).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(CommonComponent, DominantSharedDirectionRemoved) {
  Eigen::MatrixXd rows = gaussian(40, 20, 42) * 0.1;
  rows.col(0).setZero();  // every row orthogonal to e0 ...
  Eigen::VectorXd shared = Eigen::VectorXd::Zero(20);
  shared(3) = 5.0;
  rows.rowwise() += shared.transpose();  // ... and dominated by e3
  auto out = remove_common_component(rows);
  EXPECT_GT(std::abs(out.u(3)), 0.99);
  EXPECT_LT((out.vectors * out.u).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(CommonComponent, SecondProjectionIsIdempotent) {
  Eigen::MatrixXd rows = gaussian(30, 10, 43);
  rows.array() += 2.0;
  auto out = remove_common_component(rows);
  Eigen::MatrixXd twice = project_out(out.vectors, out.u);
  EXPECT_LT((twice - out.vectors).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(CommonComponent, Errors) {
  EXPECT_THROW(remove_common_component(Eigen::MatrixXd::Ones(1, 4)), ValidationError);
  EXPECT_THROW(remove_common_component(Eigen::MatrixXd::Zero(3, 4)), ValidationError);
}

TEST(AttentionProfile, Counting) {
  auto f = FeatureWordList::standard();
  EXPECT_EQ(attention_profile({"nice", "day"}, f), Eigen::Vector4d::Zero());
  EXPECT_EQ(attention_profile({"plot", "music"}, f), Eigen::Vector4d(0.5, 0, 0.5, 0));
  EXPECT_EQ(attention_profile({"shot", "shot", "acting", "great"}, f), Eigen::Vector4d(0, 2.0 / 3, 0, 1.0 / 3));
}
