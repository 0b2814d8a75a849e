#include "spamdet/artifacts.h"

#include <cstdio>
#include <fstream>
#include <limits>

#include "spamdet/binary_io.h"
#include "spamdet/error.h"

namespace spamdet {

namespace fs = std::filesystem;

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::json Provenance::to_json() const {
  return {{"stage", stage}, {"config_hash", hash_hex(config_hash)}, {"seed", seed}};
}

Provenance Provenance::from_json(const nlohmann::json& j) {
  try {
    Provenance p;
    p.stage = j.at("stage").get<std::string>();
    p.config_hash = std::stoull(j.at("config_hash").get<std::string>(), nullptr, 16);
    p.seed = j.at("seed").get<std::uint64_t>();
    return p;
  } catch (const std::exception& e) {
    throw ValidationError(std::string("bad provenance record: ") + e.what());
  }
}

fs::path stage_dir(const fs::path& work, const std::string& stage) { return work / stage; }

void write_json(const fs::path& path, const nlohmann::json& j) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

nlohmann::json read_json(const fs::path& path, const std::string& stage) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("missing " + path.string() + "; run `" + stage + "` first", stage);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_manifest(const fs::path& work, const Provenance& p, const nlohmann::json& extra) {
  nlohmann::json j = p.to_json();
  if (!extra.is_null()) j["details"] = extra;
  write_json(stage_dir(work, p.stage) / "manifest.json", j);
}

nlohmann::json require_stage(const fs::path& work, const std::string& stage, std::uint64_t config_hash) {
  const fs::path path = stage_dir(work, stage) / "manifest.json";
  if (!fs::exists(path))
    throw MissingArtifactError("stage `" + stage + "` has not been run (no " + path.string() + ")", stage);
  auto j = read_json(path, stage);
  const auto p = Provenance::from_json(j);
  if (p.config_hash != config_hash)
    throw ValidationError("stage `" + stage + "` was produced under config " + hash_hex(p.config_hash) +
                          ", current config is " + hash_hex(config_hash) + "; rerun `" + stage + "`");
  return j;
}

void KeyedMatrix::save(const fs::path& path) const {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  bin::write_magic(out, "SDKM");
  bin::write<std::uint32_t>(out, 1);
  bin::write_string(out, provenance.to_json().dump());
  bin::write<std::uint64_t>(out, static_cast<std::uint64_t>(values.rows()));
  bin::write<std::uint64_t>(out, static_cast<std::uint64_t>(values.cols()));
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    bin::write_string(out, keys[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < values.cols(); ++j) bin::write<double>(out, values(i, j));
  }
}

KeyedMatrix KeyedMatrix::load(const fs::path& path, const std::string& stage) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("missing " + path.string() + "; run `" + stage + "` first", stage);
  bin::expect_magic(in, "SDKM", "keyed matrix");
  if (bin::read<std::uint32_t>(in) != 1) throw ValidationError("unsupported keyed matrix version");
  KeyedMatrix m;
  m.provenance = Provenance::from_json(nlohmann::json::parse(bin::read_string(in)));
  const auto rows = bin::read<std::uint64_t>(in), cols = bin::read<std::uint64_t>(in);
  m.values.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  m.keys.reserve(rows);
  for (Eigen::Index i = 0; i < m.values.rows(); ++i) {
    m.keys.push_back(bin::read_string(in));
    for (Eigen::Index j = 0; j < m.values.cols(); ++j) m.values(i, j) = bin::read<double>(in);
  }
  return m;
}

void write_scores(const fs::path& path, const ScoreFile& scores) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  nlohmann::json header = scores.provenance.to_json();
  header["method"] = scores.method;
  header["threshold"] = scores.threshold;
  out << header.dump() << '\n';
  for (const auto& r : scores.records)
    out << nlohmann::json{{"review_id", r.review_id}, {"spam_score", r.spam_score}, {"label", to_string(r.label)}}.dump()
        << '\n';
}

ScoreFile read_scores(const fs::path& path, const std::string& stage) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("missing " + path.string() + "; run `" + stage + "` first", stage);
  ScoreFile s;
  std::string line;
  std::size_t line_no = 0;
  try {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      auto j = nlohmann::json::parse(line);
      if (line_no == 1) {
        s.provenance = Provenance::from_json(j);
        s.method = j.at("method").get<std::string>();
        // A threshold of +inf (nothing flagged) is stored as null.
        s.threshold = j.at("threshold").is_null() ? std::numeric_limits<double>::infinity()
                                                  : j.at("threshold").get<double>();
        continue;
      }
      s.records.push_back({j.at("review_id").get<std::string>(), j.at("spam_score").get<double>(),
                           parse_label(j.at("label").get<std::string>())});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what(), line_no);
  }
  if (line_no == 0) throw ValidationError(path.string() + " is empty");
  return s;
}

}  // namespace spamdet
