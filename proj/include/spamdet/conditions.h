#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spamdet/corpus.h"
#include "spamdet/random.h"

namespace spamdet {

// Layout: [movie score, user rating, region one-hot, genre multi-hot,
// director average, actor average]; every entry in [0, 1].
inline constexpr std::size_t kConditionDim = 28;

namespace cond_slot {
inline constexpr Eigen::Index movie_score = 0;
inline constexpr Eigen::Index user_rating = 1;
inline constexpr Eigen::Index region = 2;
inline constexpr Eigen::Index genre = region + static_cast<Eigen::Index>(kRegionCount);
inline constexpr Eigen::Index director = genre + static_cast<Eigen::Index>(kGenreCount);
inline constexpr Eigen::Index actor = director + 1;
}  // namespace cond_slot

static_assert(cond_slot::actor + 1 == static_cast<Eigen::Index>(kConditionDim));

// One earlier rating by the same user.
struct HistoryEntry {
  int rating = 0;
  std::string director_id;
  std::vector<std::string> actor_ids;
};

enum class Credit { director, actor };

// Mean rating over entries crediting any of `person_ids` in the given role.
// Falls back to the user's overall mean, then to 3.0 with no history.
double avg_person_score(const std::vector<HistoryEntry>& history, const std::vector<std::string>& person_ids,
                        Credit role);
double avg_person_score(const std::vector<HistoryEntry>& history, const std::string& person_id, Credit role);

Eigen::VectorXd encode_condition(const Movie& movie, int user_rating, const std::vector<HistoryEntry>& history,
                                 const Catalogue& catalogue = Catalogue::standard());

// Earlier reviews (strictly smaller timestamp) of the user, as history.
std::vector<HistoryEntry> history_before(const Dataset& dataset, const std::string& user_id, std::int64_t timestamp);

// One condition row per review, each encoded against the reviewer's history
// up to that review.
Eigen::MatrixXd encode_conditions(const Dataset& dataset, const std::vector<Review>& reviews,
                                  const Catalogue& catalogue = Catalogue::standard());

struct ResampleResult {
  std::vector<std::size_t> indices;  // rows of the training set
  std::size_t collisions = 0;        // rows still equal to c_g after all redraws
};

// Draws training conditions uniformly with replacement. When paired with a
// generated batch, a draw equal to that row's c_g is redrawn up to
// `max_redraws` times and then accepted.
class ConditionSampler {
 public:
  explicit ConditionSampler(Eigen::MatrixXd train_conditions, int max_redraws = 10);

  ResampleResult sample(std::size_t batch_size, Rng& rng) const;
  ResampleResult sample_mismatched(const Eigen::MatrixXd& cg_batch, Rng& rng) const;

  std::size_t distinct() const { return distinct_; }
  const Eigen::MatrixXd& conditions() const { return conditions_; }

 private:
  Eigen::MatrixXd conditions_;
  int max_redraws_;
  std::size_t distinct_ = 0;
};

ResampleResult resample_conditions(const Eigen::MatrixXd& train_conditions, const Eigen::MatrixXd& cg_batch, Rng& rng);

std::size_t count_distinct_rows(const Eigen::MatrixXd& rows);

}  // namespace spamdet
