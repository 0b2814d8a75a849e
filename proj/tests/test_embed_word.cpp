#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "spamdet/embed_word.h"
#include "spamdet/error.h"
#include "spamdet/random.h"

using namespace spamdet;

namespace {

struct Encoded {
  Vocabulary vocab;
  std::vector<std::vector<TokenId>> ids;
};

Encoded encode_all(const std::vector<std::vector<std::string>>& corpus, int min_count = 1) {
  Encoded e;
  e.vocab = build_vocab(corpus, min_count);
  for (const auto& s : corpus) e.ids.push_back(e.vocab.encode(s));
  return e;
}

// Sentences where "syn1" and "syn2" appear in exactly the same slots (between
// context words c0..c4), while "other" lives among a disjoint set d0..d4.
std::vector<std::vector<std::string>> synonym_corpus(std::uint64_t seed, int pairs = 800) {
  Rng rng(seed);
  std::uniform_int_distribution<int> pick(0, 4), coin(0, 1);
  std::vector<std::vector<std::string>> corpus;
  for (int i = 0; i < pairs; ++i) {
    std::vector<std::string> s;
    for (int j = 0; j < 4; ++j) s.push_back("c" + std::to_string(pick(rng)));
    s.push_back(coin(rng) ? "syn1" : "syn2");
    for (int j = 0; j < 4; ++j) s.push_back("c" + std::to_string(pick(rng)));
    corpus.push_back(s);
    std::vector<std::string> t;
    for (int j = 0; j < 4; ++j) t.push_back("d" + std::to_string(pick(rng)));
    t.push_back("other");
    for (int j = 0; j < 4; ++j) t.push_back("d" + std::to_string(pick(rng)));
    corpus.push_back(t);
  }
  return corpus;
}

SkipGramConfig small_config() {
  SkipGramConfig cfg;
  cfg.dim = 20;
  cfg.epochs = 5;
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST(SkipGram, AlternatingPairMakesNeighbours) {
  std::vector<std::string> s;
  for (int i = 0; i < 500; ++i) {
    s.push_back("a");
    s.push_back("b");
  }
  // Unrelated filler sentences so that "a" has more than one candidate.
  std::vector<std::vector<std::string>> corpus{s};
  for (int i = 0; i < 100; ++i) corpus.push_back({"x", "y", "z", "x", "z", "y"});
  auto e = encode_all(corpus);
  auto emb = train_skipgram(e.ids, e.vocab, small_config());
  auto nn = nearest_words(emb, e.vocab, "a", 1);
  ASSERT_EQ(nn.size(), 1u);
  EXPECT_EQ(nn[0], "b");
}

TEST(SkipGram, ShapeOfSingleSentence) {
  auto e = encode_all({{"the", "plot", "is", "the", "point"}});
  SkipGramConfig cfg;
  auto emb = train_skipgram(e.ids, e.vocab, cfg);
  EXPECT_EQ(emb.size(), e.vocab.size());
  EXPECT_EQ(emb.dim(), 100u);
  EXPECT_TRUE(emb.vectors.allFinite());
}

TEST(SkipGram, SynonymsCloserThanUnrelated) {
  auto e = encode_all(synonym_corpus(3));
  auto emb = train_skipgram(e.ids, e.vocab, small_config());
  const auto s1 = emb.row(*e.vocab.id("syn1"));
  const auto s2 = emb.row(*e.vocab.id("syn2"));
  const auto other = emb.row(*e.vocab.id("other"));
  EXPECT_GT(cosine(s1, s2), cosine(s1, other));
}

TEST(SkipGram, LossDecreasesOverFirstEpochs) {
  // Small enough that training has not converged after one epoch.
  auto e = encode_all(synonym_corpus(4, 20));
  SkipGramStats stats;
  train_skipgram(e.ids, e.vocab, small_config(), &stats);
  ASSERT_EQ(stats.epoch_loss.size(), 5u);
  for (std::size_t i = 1; i < stats.epoch_loss.size(); ++i) EXPECT_LT(stats.epoch_loss[i], stats.epoch_loss[i - 1]);
}

TEST(SkipGram, DeterministicForFixedSeed) {
  auto e = encode_all(synonym_corpus(5));
  auto a = train_skipgram(e.ids, e.vocab, small_config());
  auto b = train_skipgram(e.ids, e.vocab, small_config());
  EXPECT_EQ(a.vectors, b.vectors);
  auto cfg = small_config();
  cfg.seed = 6;
  EXPECT_NE(train_skipgram(e.ids, e.vocab, cfg).vectors, a.vectors);
}

TEST(SkipGram, TooShortCorpusRejected) {
  auto e = encode_all({{"alone"}});
  EXPECT_THROW(train_skipgram(e.ids, e.vocab, small_config()), ValidationError);
}

TEST(SkipGram, SaveLoadRoundTrip) {
  auto e = encode_all(synonym_corpus(6));
  auto emb = train_skipgram(e.ids, e.vocab, small_config());
  const auto path = std::filesystem::temp_directory_path() / "spamdet_test_emb.bin";
  emb.save(path);
  auto back = WordEmbeddings::load(path);
  std::filesystem::remove(path);
  EXPECT_EQ(back.vectors, emb.vectors);
}

TEST(Cosine, HandValues) {
  const std::vector<double> v{0.3, -2.0, 5.0}, e1{1, 0}, e2{0, 1}, d{1, 1};
  EXPECT_NEAR(cosine(v, v), 1.0, 1e-15);
  EXPECT_EQ(cosine(e1, e2), 0.0);
  EXPECT_NEAR(cosine(e1, d), 0.70711, 1e-5);
  const std::vector<double> zero{0, 0};
  EXPECT_THROW(cosine(e1, zero), ValidationError);
}

TEST(NearestWords, ZeroAndExhaustive) {
  auto e = encode_all(synonym_corpus(7));
  auto emb = train_skipgram(e.ids, e.vocab, small_config());
  EXPECT_TRUE(nearest_words(emb, e.vocab, "syn1", 0).empty());
  auto all = nearest_words(emb, e.vocab, "syn1", e.vocab.size() - 1);
  ASSERT_EQ(all.size(), e.vocab.size() - 1);
  const auto q = emb.row(*e.vocab.id("syn1"));
  for (std::size_t i = 1; i < all.size(); ++i)
    EXPECT_GE(cosine(q, emb.row(*e.vocab.id(all[i - 1]))), cosine(q, emb.row(*e.vocab.id(all[i]))));
  EXPECT_EQ(all[0], "syn2");
  EXPECT_THROW(nearest_words(emb, e.vocab, "missing", 3), ValidationError);
}

TEST(NearestWords, TiesBrokenById) {
  Vocabulary v = build_vocab({{"a", "a", "a", "b", "b", "c"}}, 1);
  WordEmbeddings emb;
  emb.vectors.resize(3, 2);
  emb.vectors << 1, 0, 2, 0, 3, 0;
  EXPECT_EQ(nearest_words(emb, v, "c", 2), (std::vector<std::string>{"a", "b"}));
}
