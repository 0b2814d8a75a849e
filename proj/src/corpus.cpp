#include "spamdet/corpus.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "spamdet/error.h"
#include "spamdet/log.h"
#include "spamdet/random.h"

namespace spamdet {

using nlohmann::json;

std::string_view to_string(Label label) {
  return label == Label::truthful ? "truthful" : "deceptive";
}

Label parse_label(std::string_view s) {
  if (s == "truthful") return Label::truthful;
  if (s == "deceptive") return Label::deceptive;
  throw ValidationError("unknown label '" + std::string(s) + "'");
}

Catalogue Catalogue::standard() {
  return Catalogue{
      {"drama", "comedy", "action", "romance", "sci-fi", "animation", "mystery",
       "thriller", "horror", "documentary", "crime", "fantasy", "adventure", "family",
       "war", "history", "biography", "music", "musical", "western"},
      {"domestic", "us_europe", "japan_korea", "other"}};
}

std::optional<std::size_t> Catalogue::genre_index(std::string_view genre) const {
  auto it = std::find(genres.begin(), genres.end(), genre);
  if (it == genres.end()) return std::nullopt;
  return static_cast<std::size_t>(it - genres.begin());
}

std::optional<std::size_t> Catalogue::region_index(std::string_view region) const {
  auto it = std::find(regions.begin(), regions.end(), region);
  if (it == regions.end()) return std::nullopt;
  return static_cast<std::size_t>(it - regions.begin());
}

std::uint64_t Catalogue::hash() const { return fnv1a64(to_json().dump()); }

json Catalogue::to_json() const { return json{{"genres", genres}, {"regions", regions}}; }

Catalogue Catalogue::from_json(const json& j) {
  auto genres = j.at("genres").get<std::vector<std::string>>();
  auto regions = j.at("regions").get<std::vector<std::string>>();
  if (genres.size() != kGenreCount)
    throw ValidationError("catalogue must list exactly 20 genres, got " + std::to_string(genres.size()));
  if (regions.size() != kRegionCount)
    throw ValidationError("catalogue must list exactly 4 regions, got " + std::to_string(regions.size()));
  Catalogue c;
  std::copy(genres.begin(), genres.end(), c.genres.begin());
  std::copy(regions.begin(), regions.end(), c.regions.begin());
  if (std::set<std::string>(genres.begin(), genres.end()).size() != kGenreCount)
    throw ValidationError("catalogue genres must be distinct");
  if (std::set<std::string>(regions.begin(), regions.end()).size() != kRegionCount)
    throw ValidationError("catalogue regions must be distinct");
  return c;
}

void Dataset::rebuild_index() {
  by_user.clear();
  for (std::size_t i = 0; i < reviews.size(); ++i) by_user[reviews[i].user_id].push_back(i);
}

const Movie& Dataset::movie_of(const Review& r) const {
  auto it = movies.find(r.movie_id);
  if (it == movies.end()) throw ValidationError("review " + r.review_id + " references unknown movie " + r.movie_id);
  return it->second;
}

std::vector<const Review*> Dataset::reviews_of(const std::string& user_id) const {
  std::vector<const Review*> out;
  auto it = by_user.find(user_id);
  if (it == by_user.end()) return out;
  out.reserve(it->second.size());
  for (std::size_t i : it->second) out.push_back(&reviews[i]);
  return out;
}

json review_to_json(const Review& r) {
  json j{{"review_id", r.review_id}, {"user_id", r.user_id}, {"movie_id", r.movie_id},
         {"rating", r.rating},       {"text", r.text},       {"timestamp", r.timestamp}};
  if (r.help_votes) j["help_votes"] = *r.help_votes;
  if (r.platform_rank) j["platform_rank"] = *r.platform_rank;
  if (r.label) j["label"] = std::string(to_string(*r.label));
  return j;
}

Review review_from_json(const json& j) {
  Review r;
  r.review_id = j.at("review_id").get<std::string>();
  r.user_id = j.at("user_id").get<std::string>();
  r.movie_id = j.at("movie_id").get<std::string>();
  r.rating = j.at("rating").get<int>();
  r.text = j.at("text").get<std::string>();
  r.timestamp = j.at("timestamp").get<std::int64_t>();
  if (auto it = j.find("help_votes"); it != j.end() && !it->is_null()) r.help_votes = it->get<std::int64_t>();
  if (auto it = j.find("platform_rank"); it != j.end() && !it->is_null()) r.platform_rank = it->get<std::int64_t>();
  if (auto it = j.find("label"); it != j.end() && !it->is_null()) r.label = parse_label(it->get<std::string>());
  return r;
}

json movie_to_json(const Movie& m) {
  return json{{"movie_id", m.movie_id},       {"douban_score", m.douban_score}, {"genres", m.genres},
              {"region", m.region},           {"director_id", m.director_id},   {"actor_ids", m.actor_ids},
              {"release_date", m.release_date}};
}

Movie movie_from_json(const json& j) {
  Movie m;
  m.movie_id = j.at("movie_id").get<std::string>();
  m.douban_score = j.at("douban_score").get<double>();
  m.genres = j.at("genres").get<std::vector<std::string>>();
  m.region = j.at("region").get<std::string>();
  m.director_id = j.at("director_id").get<std::string>();
  m.actor_ids = j.at("actor_ids").get<std::vector<std::string>>();
  m.release_date = j.at("release_date").get<std::int64_t>();
  return m;
}

void validate_review(const Review& r) {
  if (r.review_id.empty()) throw ValidationError("review_id is empty");
  if (r.rating < 1 || r.rating > 5)
    throw ValidationError("review " + r.review_id + ": rating " + std::to_string(r.rating) + " outside 1..5");
  if (r.timestamp <= 0) throw ValidationError("review " + r.review_id + ": timestamp must be positive");
  if (r.help_votes && *r.help_votes < 0) throw ValidationError("review " + r.review_id + ": negative help_votes");
  if (r.platform_rank && *r.platform_rank <= 0)
    throw ValidationError("review " + r.review_id + ": platform_rank must be positive");
}

void validate_movie(const Movie& m, const Catalogue& catalogue) {
  if (m.movie_id.empty()) throw ValidationError("movie_id is empty");
  if (!(m.douban_score >= 0.0 && m.douban_score <= 10.0))
    throw ValidationError("movie " + m.movie_id + ": douban_score outside [0,10]");
  for (const auto& g : m.genres)
    if (!catalogue.genre_index(g)) throw ValidationError("movie " + m.movie_id + ": genre '" + g + "' not in catalogue");
  if (!catalogue.region_index(m.region))
    throw ValidationError("movie " + m.movie_id + ": region '" + m.region + "' not in catalogue");
}

Dataset load_corpus(std::istream& in, SchemaMode mode, const Catalogue& catalogue) {
  Dataset ds;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json j = json::parse(line);
      if (mode == SchemaMode::reviews) {
        Review r = review_from_json(j);
        validate_review(r);
        ds.reviews.push_back(std::move(r));
      } else {
        Movie m = movie_from_json(j);
        validate_movie(m, catalogue);
        std::string id = m.movie_id;
        if (!ds.movies.emplace(id, std::move(m)).second) throw ValidationError("duplicate movie_id " + id);
      }
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  ds.rebuild_index();
  return ds;
}

Dataset load_corpus(const std::filesystem::path& path, SchemaMode mode, const Catalogue& catalogue) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  try {
    return load_corpus(in, mode, catalogue);
  } catch (const ParseError& e) {
    throw ParseError(path.filename().string() + " " + e.what(), e.line());
  }
}

Dataset merge_fragments(Dataset reviews, Dataset movies) {
  Dataset ds;
  ds.reviews = std::move(reviews.reviews);
  ds.movies = std::move(movies.movies);
  std::set<std::string> dangling;
  std::set<std::string> seen;
  for (const auto& r : ds.reviews) {
    if (!ds.movies.count(r.movie_id)) dangling.insert(r.movie_id);
    if (!seen.insert(r.review_id).second) throw ValidationError("duplicate review_id " + r.review_id);
  }
  if (!dangling.empty()) {
    std::string ids;
    for (const auto& id : dangling) ids += (ids.empty() ? "" : ", ") + id;
    throw ValidationError("reviews reference unknown movie ids: " + ids);
  }
  ds.rebuild_index();
  return ds;
}

void write_reviews(std::ostream& out, const std::vector<Review>& reviews) {
  for (const auto& r : reviews) out << review_to_json(r).dump() << '\n';
}

void write_movies(std::ostream& out, const std::map<std::string, Movie>& movies) {
  for (const auto& [id, m] : movies) out << movie_to_json(m).dump() << '\n';
}

void save_reviews(const std::filesystem::path& path, const std::vector<Review>& reviews) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_reviews(out, reviews);
}

void save_movies(const std::filesystem::path& path, const std::map<std::string, Movie>& movies) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_movies(out, movies);
}

json ValidationReport::to_json() const {
  return json{{"reviews", reviews}, {"users", users}, {"movies", movies}, {"labeled", labeled}, {"deceptive", deceptive}};
}

ValidationReport validation_report(const Dataset& dataset) {
  ValidationReport rep;
  rep.reviews = dataset.reviews.size();
  rep.users = dataset.by_user.size();
  rep.movies = dataset.movies.size();
  for (const auto& r : dataset.reviews) {
    if (!r.label) continue;
    ++rep.labeled;
    if (*r.label == Label::deceptive) ++rep.deceptive;
  }
  return rep;
}

TimeSplit split_by_time(const Dataset& dataset, const std::string& user_id, std::int64_t cutoff) {
  auto it = dataset.by_user.find(user_id);
  if (it == dataset.by_user.end()) throw ValidationError("unknown user " + user_id);
  TimeSplit split;
  for (std::size_t i : it->second) {
    const Review& r = dataset.reviews[i];
    (r.timestamp < cutoff ? split.train : split.test).push_back(r);
  }
  if (split.train.empty()) {
    split.empty_train = true;
    warn("user " + user_id + " has no reviews before the cutoff; no model can be trained");
  }
  return split;
}

}  // namespace spamdet
