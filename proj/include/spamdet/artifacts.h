#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "spamdet/corpus.h"

namespace spamdet {

// Stamped on every artifact so later stages can refuse mixed inputs.
struct Provenance {
  std::string stage;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static Provenance from_json(const nlohmann::json& j);
};

std::string hash_hex(std::uint64_t h);

// <work>/<stage>/manifest.json
std::filesystem::path stage_dir(const std::filesystem::path& work, const std::string& stage);
void write_manifest(const std::filesystem::path& work, const Provenance& p, const nlohmann::json& extra = {});

// Reads a prior stage's manifest. Throws MissingArtifactError naming the
// stage when it has not run, ValidationError when it ran under another config.
nlohmann::json require_stage(const std::filesystem::path& work, const std::string& stage, std::uint64_t config_hash);

// Rows keyed by review id.
struct KeyedMatrix {
  Provenance provenance;
  std::vector<std::string> keys;
  Eigen::MatrixXd values;

  void save(const std::filesystem::path& path) const;
  static KeyedMatrix load(const std::filesystem::path& path, const std::string& stage);
};

struct ScoreRecord {
  std::string review_id;
  double spam_score = 0.0;
  Label label = Label::truthful;
};

struct ScoreFile {
  Provenance provenance;
  std::string method;
  double threshold = 0.0;
  std::vector<ScoreRecord> records;
};

// First line is a header object, then one {review_id, spam_score, label} per line.
void write_scores(const std::filesystem::path& path, const ScoreFile& scores);
ScoreFile read_scores(const std::filesystem::path& path, const std::string& stage);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path, const std::string& stage);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace spamdet
