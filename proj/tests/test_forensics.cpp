#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "oracles.h"
#include "spamdet/error.h"
#include "spamdet/forensics.h"
#include "spamdet/random.h"

using namespace spamdet;

namespace {

Review make_review(std::string id, std::string movie, int rating, std::int64_t ts = 0, std::string user = "u1") {
  Review r;
  r.review_id = std::move(id);
  r.user_id = std::move(user);
  r.movie_id = std::move(movie);
  r.rating = rating;
  r.text = "x";
  r.timestamp = ts;
  return r;
}

void add_movie(Dataset& d, const std::string& id, double score, const std::vector<int>& ratings) {
  Movie m;
  m.movie_id = id;
  m.douban_score = score;
  m.genres = {"Drama"};
  m.region = "China";
  d.movies[id] = m;
  for (std::size_t i = 0; i < ratings.size(); ++i)
    d.reviews.push_back(make_review(id + "_" + std::to_string(i), id, ratings[i]));
}

RatingHistogram random_histogram(Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RatingHistogram h;
  for (auto& v : h) v = u(rng) < 0.2 ? 0.0 : u(rng);
  if (std::accumulate(h.begin(), h.end(), 0.0) == 0.0) h[2] = 1.0;
  const double s = std::accumulate(h.begin(), h.end(), 0.0);
  for (auto& v : h) v /= s;
  return h;
}

}  // namespace

TEST(RatingHistogram, Counting) {
  EXPECT_EQ(rating_histogram(std::vector<int>{5, 5, 1, 1}), (RatingHistogram{0.5, 0, 0, 0, 0.5}));
  EXPECT_EQ(rating_histogram(std::vector<int>{5, 5, 5}), (RatingHistogram{0, 0, 0, 0, 1}));
  EXPECT_THROW(rating_histogram(std::vector<int>{}), ValidationError);
}

TEST(RatingHistogram, RecoversSamplingDistribution) {
  const std::array<double, 5> probs{0.1, 0.05, 0.15, 0.3, 0.4};
  Rng rng(3);
  std::discrete_distribution<int> dist(probs.begin(), probs.end());
  std::vector<int> ratings(10000);
  for (auto& r : ratings) r = dist(rng) + 1;
  auto h = rating_histogram(ratings);
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(h[i], probs[i], 0.02);
}

TEST(Wasserstein, HandValues) {
  RatingHistogram a{1, 0, 0, 0, 0}, b{0, 0, 0, 0, 1}, p{0.5, 0, 0, 0, 0.5}, m{0, 0, 1, 0, 0};
  EXPECT_DOUBLE_EQ(wasserstein_1d(a, a), 0.0);
  EXPECT_DOUBLE_EQ(wasserstein_1d(a, b), 4.0);
  EXPECT_DOUBLE_EQ(wasserstein_1d(p, m), 2.0);
  EXPECT_NEAR(oracle::transport_lp(p, m), 2.0, 1e-12);
}

TEST(Wasserstein, RejectsUnnormalised) {
  RatingHistogram ok{0, 0, 1, 0, 0}, bad{0.5, 0, 0, 0, 0.4}, neg{1.5, -0.5, 0, 0, 0};
  EXPECT_THROW(wasserstein_1d(ok, bad), ValidationError);
  EXPECT_THROW(wasserstein_1d(neg, ok), ValidationError);
}

TEST(Wasserstein, MatchesTransportLpAndIsAMetric) {
  Rng rng(17);
  for (int i = 0; i < 200; ++i) {
    auto a = random_histogram(rng), b = random_histogram(rng), c = random_histogram(rng);
    const double ab = wasserstein_1d(a, b);
    EXPECT_NEAR(ab, oracle::transport_lp(a, b), 1e-9);
    EXPECT_DOUBLE_EQ(ab, wasserstein_1d(b, a));
    EXPECT_LE(ab, wasserstein_1d(a, c) + wasserstein_1d(c, b) + 1e-12);
    EXPECT_EQ(wasserstein_1d(a, a), 0.0);
  }
}

TEST(SpamMovieScores, IdenticalPairHasZeroDistance) {
  Dataset d;
  add_movie(d, "m1", 7.0, {3, 4, 4, 5});
  add_movie(d, "m2", 7.0, {4, 5, 3, 4});
  auto s = spam_movie_scores(d);
  ASSERT_EQ(s.size(), 2u);
  for (const auto& m : s) {
    EXPECT_TRUE(m.has_reference);
    EXPECT_NEAR(m.wasserstein, 0.0, 1e-12);
  }
}

TEST(SpamMovieScores, PolarisedMovieRanksFirstInBucket) {
  Dataset d;
  add_movie(d, "a", 7.9, {3, 4, 4, 4, 5, 3, 4});
  add_movie(d, "b", 7.9, {4, 4, 3, 4, 4, 5});
  add_movie(d, "c", 7.94, {4, 3, 4, 5, 4});
  add_movie(d, "polar", 7.86, {5, 5, 5, 1, 1, 1, 1, 5});
  add_movie(d, "other", 5.0, {1, 2});
  auto s = spam_movie_scores(d);
  ASSERT_EQ(s.size(), 5u);
  EXPECT_EQ(s.front().movie_id, "polar");
  EXPECT_NEAR(s.front().score_bucket, 7.9, 1e-9);
  EXPECT_EQ(s.back().movie_id, "other");
  EXPECT_FALSE(s.back().has_reference);
  EXPECT_TRUE(s.back().to_json()["wasserstein"].is_null());
}

TEST(TemporalProfile, AllNegativesOnOneDayFlagged) {
  std::vector<Review> rs;
  for (int day = 0; day < 30; ++day) rs.push_back(make_review("p" + std::to_string(day), "m", 5, day * 86400 + 100));
  for (int i = 0; i < 6; ++i) rs.push_back(make_review("n" + std::to_string(i), "m", 1, 4 * 86400 + i));
  auto p = temporal_profile(rs);
  ASSERT_EQ(p.days.size(), 30u);
  for (const auto& d : p.days) {
    EXPECT_EQ(d.spike[static_cast<int>(RatingBand::negative)], d.day == 4);
    EXPECT_FALSE(d.spike[static_cast<int>(RatingBand::positive)]);
  }
}

TEST(TemporalProfile, UniformSpreadNotFlaggedAndSharesSumToOne) {
  std::vector<Review> rs;
  for (int day = 0; day < 30; ++day)
    for (int r = 1; r <= 5; ++r) rs.push_back(make_review(std::to_string(day) + "_" + std::to_string(r), "m", r, day * 86400));
  auto p = temporal_profile(rs);
  for (std::size_t b = 0; b < kBandCount; ++b) {
    double sum = 0;
    for (const auto& d : p.days) {
      sum += d.share[b];
      EXPECT_FALSE(d.spike[b]);
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(TemporalProfile, ReleaseDayBurstFlagged) {
  // 40% of negatives on day 0, the rest spread over days 1..29.
  std::vector<Review> rs;
  int id = 0;
  for (int i = 0; i < 40; ++i) rs.push_back(make_review(std::to_string(id++), "m", 1, 0));
  Rng rng(5);
  std::uniform_int_distribution<int> day(1, 29);
  for (int i = 0; i < 60; ++i) rs.push_back(make_review(std::to_string(id++), "m", 2, day(rng) * 86400 + 7));
  for (int d = 0; d < 30; ++d) rs.push_back(make_review(std::to_string(id++), "m", 4, d * 86400 + 9));
  auto p = temporal_profile(rs);
  for (const auto& d : p.days) EXPECT_EQ(d.spike[static_cast<int>(RatingBand::negative)], d.day == 0) << d.day;
}

TEST(RankDiscordance, IdenticalOrderingsAreZero) {
  std::vector<Review> rs;
  for (int i = 0; i < 10; ++i) {
    auto r = make_review("r" + std::to_string(i), "m", 3);
    r.help_votes = 100 - i;
    r.platform_rank = i + 1;
    rs.push_back(r);
  }
  for (const auto& it : rank_discordance(rs).items) EXPECT_EQ(it.suspicion, 0);
}

TEST(RankDiscordance, BuriedTopItem) {
  std::vector<Review> rs;
  for (int i = 0; i < 100; ++i) {
    auto r = make_review("r" + std::to_string(100 + i), "m", 3);
    r.help_votes = i == 0 ? 10000 : 100 - i;
    r.platform_rank = i == 0 ? 100 : i;
    rs.push_back(r);
  }
  rs.push_back(make_review("missing", "m", 3));
  auto rep = rank_discordance(rs);
  EXPECT_EQ(rep.skipped, 1u);
  EXPECT_EQ(rep.items.front().review_id, "r100");
  EXPECT_EQ(rep.items.front().suspicion, 99);
}

TEST(RankDiscordance, MatchesDoubleSortOracle) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 50;
    std::vector<std::int64_t> ranks(n);
    std::iota(ranks.begin(), ranks.end(), 1);
    std::shuffle(ranks.begin(), ranks.end(), rng);
    std::uniform_int_distribution<int> votes(0, 20);  // plenty of ties
    std::vector<Review> rs;
    std::vector<oracle::RankedItem> items;
    for (int i = 0; i < n; ++i) {
      auto r = make_review("id" + std::to_string(i), "m", 3);
      r.help_votes = votes(rng);
      r.platform_rank = ranks[i];
      items.push_back({r.review_id, *r.help_votes, *r.platform_rank});
      rs.push_back(r);
    }
    auto rep = rank_discordance(rs);
    std::vector<std::pair<std::string, std::int64_t>> got;
    std::int64_t total = 0;
    for (const auto& it : rep.items) {
      got.emplace_back(it.review_id, it.suspicion);
      total += it.suspicion;
    }
    std::sort(got.begin(), got.end());
    EXPECT_EQ(got, oracle::rank_differences(items));
    EXPECT_EQ(total, 0);
  }
}

TEST(Attitude, OppositeAfterConsistentHistory) {
  std::vector<HistoryEntry> h{{5, "d1", {}}, {5, "d1", {}}, {4, "d1", {}}, {1, "d2", {}}};
  auto r = attitude_consistency(h, "d1", Credit::director, 1);
  EXPECT_TRUE(r.opposite);
  EXPECT_NEAR(r.delta, 14.0 / 3.0 - 1.0, 1e-12);
  EXPECT_EQ(r.prior_ratings, 3u);
}

TEST(Attitude, InsufficientHistoryIsConsistent) {
  std::vector<HistoryEntry> h{{3, "d1", {}}};
  auto r = attitude_consistency(h, "d1", Credit::director, 1);
  EXPECT_FALSE(r.opposite);
  EXPECT_EQ(r.prior_ratings, 1u);
}

TEST(Attitude, GradualDriftIsConsistent) {
  std::vector<HistoryEntry> h;
  for (int rating : {5, 4, 3}) {
    EXPECT_FALSE(attitude_consistency(h, "a1", Credit::actor, rating).opposite);
    h.push_back({rating, "d", {"a1", "a2"}});
  }
}

TEST(Attitude, DatasetScanFindsReversal) {
  Dataset d;
  Movie m;
  m.genres = {"Drama"};
  m.region = "China";
  m.director_id = "dir";
  for (int i = 0; i < 4; ++i) {
    m.movie_id = "m" + std::to_string(i);
    d.movies[m.movie_id] = m;
    d.reviews.push_back(make_review("r" + std::to_string(i), m.movie_id, i < 3 ? 5 : 1, 100 * i));
  }
  d.rebuild_index();
  auto flags = attitude_flags(d);
  ASSERT_EQ(flags.size(), 1u);
  EXPECT_EQ(flags[0].review_id, "r3");
  EXPECT_EQ(flags[0].person_id, "dir");
}
