#include "spamdet/synth.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "spamdet/error.h"
#include "spamdet/log.h"
#include "spamdet/random.h"

namespace spamdet {

nlohmann::json SynthConfig::to_json() const {
  return {{"n_users", n_users},
          {"genres_per_user", genres_per_user},
          {"movies_per_genre", movies_per_genre},
          {"train_reviews_per_user", train_reviews_per_user},
          {"test_reviews_per_user", test_reviews_per_user},
          {"spam_rate", spam_rate},
          {"filler_words", filler_words},
          {"sentiment_words_per_band", sentiment_words_per_band},
          {"sentiment_bands", sentiment_bands},
          {"mean_length", mean_length},
          {"min_length", min_length},
          {"aspect_share", aspect_share},
          {"sentiment_share", sentiment_share},
          {"profile_concentration", profile_concentration},
          {"rating_noise", rating_noise},
          {"director_affinity_sd", director_affinity_sd},
          {"n_directors", n_directors},
          {"n_actors", n_actors},
          {"actors_per_movie", actors_per_movie},
          {"spam_kind_weights", spam_kind_weights},
          {"cutoff", cutoff},
          {"seed", seed}};
}

SynthConfig SynthConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("synth config must be a JSON object");
  nlohmann::json merged = SynthConfig{}.to_json();
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!merged.contains(it.key())) throw ValidationError("unknown synth config key '" + it.key() + "'");
    merged[it.key()] = it.value();
  }
  SynthConfig c;
  try {
    c.n_users = merged["n_users"];
    c.genres_per_user = merged["genres_per_user"];
    c.movies_per_genre = merged["movies_per_genre"];
    c.train_reviews_per_user = merged["train_reviews_per_user"];
    c.test_reviews_per_user = merged["test_reviews_per_user"];
    c.spam_rate = merged["spam_rate"];
    c.filler_words = merged["filler_words"];
    c.sentiment_words_per_band = merged["sentiment_words_per_band"];
    c.sentiment_bands = merged["sentiment_bands"];
    c.mean_length = merged["mean_length"];
    c.min_length = merged["min_length"];
    c.aspect_share = merged["aspect_share"];
    c.sentiment_share = merged["sentiment_share"];
    c.profile_concentration = merged["profile_concentration"];
    c.rating_noise = merged["rating_noise"];
    c.director_affinity_sd = merged["director_affinity_sd"];
    c.n_directors = merged["n_directors"];
    c.n_actors = merged["n_actors"];
    c.actors_per_movie = merged["actors_per_movie"];
    c.spam_kind_weights = merged["spam_kind_weights"];
    c.cutoff = merged["cutoff"];
    c.seed = merged["seed"];
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad synth config value: ") + e.what());
  }
  return c;
}

std::string_view to_string(SpamKind kind) {
  switch (kind) {
    case SpamKind::none: return "none";
    case SpamKind::attention_swap: return "attention_swap";
    case SpamKind::swap_and_flip: return "swap_and_flip";
    case SpamKind::rating_flip: return "rating_flip";
  }
  return "?";
}

namespace {

void validate(const SynthConfig& c, const Catalogue& catalogue) {
  auto fail = [](const std::string& m) { throw ValidationError("synth config: " + m); };
  if (!(c.spam_rate >= 0 && c.spam_rate <= 1)) fail("spam_rate must be in [0, 1]");
  if (c.n_users == 0) fail("n_users must be positive");
  if (c.genres_per_user == 0 || c.genres_per_user > kGenreCount) fail("genres_per_user must be in 1..20");
  if (c.movies_per_genre == 0) fail("movies_per_genre must be positive");
  if (c.genres_per_user * c.movies_per_genre < c.train_reviews_per_user + c.test_reviews_per_user)
    fail("users would have to review a movie twice; raise movies_per_genre");
  if (c.filler_words == 0 || c.sentiment_words_per_band == 0) fail("word pools must be nonempty");
  if (c.sentiment_bands != 3 && c.sentiment_bands != 5) fail("sentiment_bands must be 3 or 5");
  if (c.min_length == 0 || !(c.mean_length > 0)) fail("review length must be positive");
  if (c.aspect_share < 0 || c.sentiment_share < 0 || c.aspect_share + c.sentiment_share > 1)
    fail("token shares must be nonnegative and sum to at most 1");
  if (!(c.profile_concentration > 0)) fail("profile_concentration must be positive");
  if (c.n_directors == 0 || c.n_actors < c.actors_per_movie || c.actors_per_movie == 0) fail("bad cast pools");
  double w = 0;
  for (double x : c.spam_kind_weights) {
    if (x < 0) fail("spam_kind_weights must be nonnegative");
    w += x;
  }
  if (w <= 0) fail("spam_kind_weights must not all be zero");
  (void)catalogue;
}

Eigen::Vector4d dirichlet(double alpha, Rng& rng) {
  std::gamma_distribution<double> g(alpha, 1.0);
  Eigen::Vector4d v;
  for (int i = 0; i < 4; ++i) v(i) = g(rng);
  const double s = v.sum();
  if (s <= 0) return Eigen::Vector4d::Constant(0.25);
  return v / s;
}

std::string padded(const char* prefix, std::size_t i, int width) {
  std::ostringstream s;
  s << prefix << std::setw(width) << std::setfill('0') << i;
  return s.str();
}

struct Pools {
  std::array<std::vector<std::string>, kAspectCount> aspect;
  std::vector<std::vector<std::string>> sentiment;  // by rating band
  std::vector<std::string> filler;
};

Pools make_pools(const SynthConfig& c) {
  Pools p;
  const auto features = FeatureWordList::standard();
  for (Aspect a : kAspects)
    for (const auto& w : features.words(a)) p.aspect[static_cast<std::size_t>(a)].push_back(w.word);
  const std::vector<std::string> names = c.sentiment_bands == 5
                                             ? std::vector<std::string>{"awful", "bad", "okay", "good", "great"}
                                             : std::vector<std::string>{"bad", "okay", "good"};
  for (const auto& name : names) {
    p.sentiment.emplace_back();
    for (std::size_t i = 0; i < c.sentiment_words_per_band; ++i) p.sentiment.back().push_back(name + std::to_string(i));
  }
  for (std::size_t i = 0; i < c.filler_words; ++i) p.filler.push_back(padded("w", i, 4));
  return p;
}

std::size_t sentiment_band(int rating, int bands) {
  if (bands == 5) return static_cast<std::size_t>(rating - 1);
  return rating <= 2 ? 0 : rating == 3 ? 1 : 2;
}

std::string write_text(const Eigen::Vector4d& profile, int rating, const SynthConfig& c, const Pools& pools, Rng& rng) {
  std::poisson_distribution<std::size_t> length(c.mean_length);
  const std::size_t n = std::max(c.min_length, length(rng));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::discrete_distribution<std::size_t> aspect(profile.data(), profile.data() + 4);
  const auto& senti = pools.sentiment[sentiment_band(rating, c.sentiment_bands)];
  std::string text;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = u(rng);
    const std::vector<std::string>* pool;
    if (r < c.aspect_share) pool = &pools.aspect[aspect(rng)];
    else if (r < c.aspect_share + c.sentiment_share) pool = &senti;
    else pool = &pools.filler;
    std::uniform_int_distribution<std::size_t> pick(0, pool->size() - 1);
    if (!text.empty()) text += ' ';
    text += (*pool)[pick(rng)];
  }
  return text;
}

}  // namespace

SynthCorpus generate_corpus(const SynthConfig& c, const Catalogue& catalogue) {
  validate(c, catalogue);
  if (c.genres_per_user < 2 || c.profile_concentration >= 100.0)
    warn("synthetic config gives every user near-identical attention across genres; "
         "attention-swapped spam is indistinguishable by construction");

  SynthCorpus out;
  out.cutoff = c.cutoff;
  const Pools pools = make_pools(c);

  // Movies.
  Rng movie_rng(derive_seed(c.seed, "movies"));
  std::uniform_int_distribution<std::size_t> region(0, kRegionCount - 1), director(0, c.n_directors - 1),
      actor(0, c.n_actors - 1);
  std::uniform_real_distribution<double> score(3.0, 9.0);
  std::uniform_int_distribution<std::int64_t> release(0, 300);
  std::array<std::vector<std::string>, kGenreCount> movies_by_genre;
  for (std::size_t g = 0; g < kGenreCount; ++g) {
    for (std::size_t k = 0; k < c.movies_per_genre; ++k) {
      Movie m;
      m.movie_id = padded("m", g * c.movies_per_genre + k, 5);
      m.douban_score = std::round(score(movie_rng) * 10.0) / 10.0;
      m.genres = {catalogue.genres[g]};
      m.region = catalogue.regions[region(movie_rng)];
      m.director_id = padded("d", director(movie_rng), 3);
      while (m.actor_ids.size() < c.actors_per_movie) {
        auto a = padded("a", actor(movie_rng), 3);
        if (std::find(m.actor_ids.begin(), m.actor_ids.end(), a) == m.actor_ids.end()) m.actor_ids.push_back(a);
      }
      m.release_date = c.cutoff - 400 * 86400 + release(movie_rng) * 86400;
      movies_by_genre[g].push_back(m.movie_id);
      out.dataset.movies[m.movie_id] = std::move(m);
    }
  }

  double weight_sum = 0;
  for (double w : c.spam_kind_weights) weight_sum += w;
  const std::size_t per_user = c.train_reviews_per_user + c.test_reviews_per_user;

  for (std::size_t ui = 0; ui < c.n_users; ++ui) {
    const std::string user_id = padded("u", ui, 3);
    Rng rng(derive_seed(c.seed, user_id));
    UserProfile prof;

    std::vector<std::size_t> genre_order(kGenreCount);
    std::iota(genre_order.begin(), genre_order.end(), std::size_t{0});
    std::shuffle(genre_order.begin(), genre_order.end(), rng);
    genre_order.resize(c.genres_per_user);
    std::sort(genre_order.begin(), genre_order.end());
    for (std::size_t g : genre_order) {
      prof.genres.push_back(catalogue.genres[g]);
      prof.attention[catalogue.genres[g]] = dirichlet(c.profile_concentration, rng);
    }
    std::uniform_real_distribution<double> tendency(1.5, 4.8);
    for (auto& m : prof.region_mean) m = tendency(rng);
    std::normal_distribution<double> affinity_noise(0.0, c.director_affinity_sd);
    std::vector<double> affinity(c.n_directors);
    for (auto& a : affinity) a = affinity_noise(rng);

    // The genre whose profile is farthest (L1) from each genre's profile.
    std::map<std::string, std::string> most_dissimilar;
    for (const auto& g : prof.genres) {
      double best = -1;
      for (const auto& h : prof.genres) {
        if (h == g) continue;
        const double d = (prof.attention[g] - prof.attention[h]).lpNorm<1>();
        if (d > best) {
          best = d;
          most_dissimilar[g] = h;
        }
      }
      if (best < 0) most_dissimilar[g] = g;
    }

    std::vector<std::string> pool;
    for (std::size_t g : genre_order) pool.insert(pool.end(), movies_by_genre[g].begin(), movies_by_genre[g].end());
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(per_user);

    std::normal_distribution<double> noise(0.0, c.rating_noise);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<std::int64_t> jitter(0, 3599);
    std::discrete_distribution<int> kind_pick(c.spam_kind_weights.begin(), c.spam_kind_weights.end());
    std::geometric_distribution<std::int64_t> votes(0.15);

    for (std::size_t k = 0; k < per_user; ++k) {
      const Movie& m = out.dataset.movies.at(pool[k]);
      const bool test = k >= c.train_reviews_per_user;
      const std::size_t region_idx = *catalogue.region_index(m.region);
      const std::size_t dir_idx = static_cast<std::size_t>(std::stoul(m.director_id.substr(1)));
      const double mean =
          prof.region_mean[region_idx] + affinity[dir_idx] + 0.3 * (m.douban_score - 6.0) / 1.5;
      int rating = static_cast<int>(std::clamp(std::lround(mean + noise(rng)), 1L, 5L));

      GeneratedReview gen{SpamKind::none, m.genres.front()};
      if (test && u(rng) < c.spam_rate) {
        gen.kind = static_cast<SpamKind>(kind_pick(rng) + 1);
        if (gen.kind != SpamKind::rating_flip) gen.profile_genre = most_dissimilar[m.genres.front()];
        if (gen.kind != SpamKind::attention_swap) rating = rating == 3 ? (mean >= 3.0 ? 1 : 5) : 6 - rating;
      }

      Review r;
      r.review_id = user_id + "_" + padded("r", k, 4);
      r.user_id = user_id;
      r.movie_id = m.movie_id;
      r.rating = rating;
      r.text = write_text(prof.attention.at(gen.profile_genre), rating, c, pools, rng);
      const auto offset = static_cast<std::int64_t>(k) - static_cast<std::int64_t>(c.train_reviews_per_user);
      r.timestamp = c.cutoff + offset * 3600 * 6 + jitter(rng) + (test ? 1 : 0);
      r.help_votes = votes(rng);
      r.label = gen.kind == SpamKind::none ? Label::truthful : Label::deceptive;
      out.provenance[r.review_id] = gen;
      out.dataset.reviews.push_back(std::move(r));
    }
    out.users[user_id] = std::move(prof);
  }

  // Platform rank within each movie follows votes, ties by review id.
  std::map<std::string, std::vector<Review*>> by_movie;
  for (auto& r : out.dataset.reviews) by_movie[r.movie_id].push_back(&r);
  for (auto& [id, rs] : by_movie) {
    std::sort(rs.begin(), rs.end(), [](const Review* a, const Review* b) {
      return *a->help_votes != *b->help_votes ? *a->help_votes > *b->help_votes : a->review_id < b->review_id;
    });
    for (std::size_t i = 0; i < rs.size(); ++i) rs[i]->platform_rank = static_cast<std::int64_t>(i + 1);
  }
  out.dataset.rebuild_index();
  return out;
}

void write_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<Review> unlabeled = corpus.dataset.reviews;
  for (auto& r : unlabeled) r.label.reset();
  save_reviews(dir / "reviews.jsonl", unlabeled);
  save_movies(dir / "movies.jsonl", corpus.dataset.movies);
  std::ofstream labels(dir / "labels.jsonl");
  if (!labels) throw Error("cannot write " + (dir / "labels.jsonl").string());
  for (const auto& r : corpus.dataset.reviews)
    labels << nlohmann::json{{"review_id", r.review_id}, {"label", to_string(*r.label)}}.dump() << '\n';
}

std::map<std::string, Label> load_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("missing labels file " + path.string(), "synth");
  std::map<std::string, Label> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      out[j.at("review_id").get<std::string>()] = parse_label(j.at("label").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ": " + e.what(), line_no);
    }
  }
  return out;
}

}  // namespace spamdet
