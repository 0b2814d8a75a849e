#include "spamdet/cli.h"

#include <fstream>
#include <sstream>

#include <CLI11.hpp>

#include "spamdet/artifacts.h"
#include "spamdet/conditions.h"
#include "spamdet/error.h"
#include "spamdet/eval.h"
#include "spamdet/forensics.h"
#include "spamdet/pipeline.h"

namespace spamdet {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string work, corpus, labels;
  std::optional<std::size_t> threads;
  std::vector<std::string> overrides;  // dotted.key=value
  std::string method;
};

// Sets a dotted key; the value is parsed as JSON when possible, else kept as a string.
void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ValidationError("override '" + assignment + "' is not key=value");
  const std::string value = assignment.substr(eq + 1);
  json* node = &j;
  std::stringstream path(assignment.substr(0, eq));
  for (std::string part; std::getline(path, part, '.');) node = &(*node)[part];
  json parsed = json::parse(value, nullptr, false);
  *node = parsed.is_discarded() ? json(value) : parsed;
}

PipelineConfig load_config(const Options& o) {
  std::ifstream in(o.config_path);
  if (!in) throw ValidationError("cannot open config " + o.config_path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ValidationError("config " + o.config_path + " is not valid JSON");
  if (o.seed) j["seed"] = *o.seed;
  if (!o.work.empty()) j["paths"]["work"] = o.work;
  if (!o.corpus.empty()) j["paths"]["corpus"] = o.corpus;
  if (o.threads) j["threads"] = *o.threads;
  for (const auto& a : o.overrides) apply_override(j, a);
  return PipelineConfig::from_json(j);
}

class Stages {
 public:
  Stages(PipelineConfig cfg, std::ostream& out) : cfg_(std::move(cfg)), out_(out), work_(cfg_.work_dir), corpus_(cfg_.corpus_dir) {}

  Provenance stamp(const std::string& stage) const { return {stage, cfg_.hash(), cfg_.seed}; }

  Dataset dataset() const {
    for (const char* f : {"reviews.jsonl", "movies.jsonl"})
      if (!fs::exists(corpus_ / f))
        throw MissingArtifactError("corpus file " + (corpus_ / f).string() + " not found; run `synth` or supply a corpus",
                                   "synth");
    return merge_fragments(load_corpus(corpus_ / "reviews.jsonl", SchemaMode::reviews),
                           load_corpus(corpus_ / "movies.jsonl", SchemaMode::movies));
  }

  void synth() {
    auto corpus = generate_corpus(cfg_.synth);
    write_corpus(corpus, corpus_);
    json details = {{"corpus", corpus_.string()}, {"reviews", corpus.dataset.reviews.size()},
                    {"cutoff", corpus.cutoff}};
    write_manifest(work_, stamp("synth"), details);
    out_ << "synth: wrote " << corpus.dataset.reviews.size() << " reviews to " << corpus_.string() << '\n';
  }

  void ingest() {
    const Dataset d = dataset();
    const auto catalogue = Catalogue::standard();
    for (const auto& [id, m] : d.movies) validate_movie(m, catalogue);
    for (const auto& r : d.reviews) validate_review(r);
    const auto report = validation_report(d).to_json();
    write_manifest(work_, stamp("ingest"), report);
    out_ << "ingest: " << report.dump() << '\n';
  }

  void train_embed() {
    require_stage(work_, "ingest", cfg_.hash());
    const auto model = train_embedding(dataset().reviews, cfg_.embed);
    const fs::path dir = stage_dir(work_, "train-embed");
    write_json(dir / "vocab.json", model.vocab.to_json());
    model.words.save(dir / "words.bin");
    write_json(dir / "features.json", model.features.to_json());
    write_json(dir / "sif.json", model.sif.to_json());
    write_manifest(work_, stamp("train-embed"), {{"vocabulary", model.vocab.size()}, {"feature_words", model.features.size()}});
    out_ << "train-embed: " << model.vocab.size() << " words, " << model.features.size() << " feature words\n";
  }

  EmbeddingModel embedding_model() const {
    require_stage(work_, "train-embed", cfg_.hash());
    const fs::path dir = stage_dir(work_, "train-embed");
    EmbeddingModel m;
    m.vocab = Vocabulary::from_json(read_json(dir / "vocab.json", "train-embed"));
    m.words = WordEmbeddings::load(dir / "words.bin");
    m.features = FeatureWordList::from_json(read_json(dir / "features.json", "train-embed"));
    m.sif = SifConfig::from_json(read_json(dir / "sif.json", "train-embed"));
    return m;
  }

  void embed() {
    const auto model = embedding_model();
    const Dataset d = dataset();
    auto rv = embed_reviews(d.reviews, model, cfg_.embed.tokenize, cfg_.embed.use_attention, cfg_.detection.cutoff);
    KeyedMatrix km{stamp("embed"), rv.review_ids, rv.vectors};
    km.save(stage_dir(work_, "embed") / "vectors.bin");
    KeyedMatrix common{stamp("embed"), {}, Eigen::MatrixXd(static_cast<Eigen::Index>(rv.common.size()), rv.vectors.cols())};
    for (const auto& [user, u] : rv.common) {
      common.values.row(static_cast<Eigen::Index>(common.keys.size())) = u.transpose();
      common.keys.push_back(user);
    }
    common.save(stage_dir(work_, "embed") / "common_components.bin");
    write_manifest(work_, stamp("embed"), {{"reviews", rv.review_ids.size()}, {"attention", cfg_.embed.use_attention}});
    out_ << "embed: " << rv.review_ids.size() << " review vectors\n";
  }

  void encode() {
    require_stage(work_, "ingest", cfg_.hash());
    const Dataset d = dataset();
    KeyedMatrix km{stamp("encode"), {}, encode_conditions(d, d.reviews, Catalogue::standard())};
    for (const auto& r : d.reviews) km.keys.push_back(r.review_id);
    km.save(stage_dir(work_, "encode") / "conditions.bin");
    write_manifest(work_, stamp("encode"), {{"reviews", km.keys.size()}});
    out_ << "encode: " << km.keys.size() << " condition vectors\n";
  }

  // Vectors and conditions aligned with the dataset's review order.
  struct Inputs {
    Dataset dataset;
    Eigen::MatrixXd vectors, conditions;
    std::vector<UserRows> users;
  };

  Inputs inputs() const {
    require_stage(work_, "embed", cfg_.hash());
    require_stage(work_, "encode", cfg_.hash());
    Inputs in{dataset(), {}, {}, {}};
    const auto v = KeyedMatrix::load(stage_dir(work_, "embed") / "vectors.bin", "embed");
    const auto c = KeyedMatrix::load(stage_dir(work_, "encode") / "conditions.bin", "encode");
    if (v.provenance.config_hash != c.provenance.config_hash)
      throw ValidationError("review vectors and conditions come from different configs; rerun `embed` and `encode`");
    if (v.provenance.config_hash != cfg_.hash())
      throw ValidationError("review vectors were built under another config; rerun `embed`");
    if (v.keys.size() != in.dataset.reviews.size() || c.keys != v.keys)
      throw ValidationError("vectors, conditions and corpus disagree on the reviews; rerun `embed` and `encode`");
    for (std::size_t i = 0; i < v.keys.size(); ++i)
      if (v.keys[i] != in.dataset.reviews[i].review_id)
        throw ValidationError("vector rows are not in corpus order; rerun `embed`");
    in.vectors = v.values;
    in.conditions = c.values;
    in.users = split_rows(in.dataset.reviews, cfg_.detection.cutoff);
    return in;
  }

  void train() {
    const auto in = inputs();
    auto models = train_user_models(in.users, in.vectors, in.conditions, cfg_);
    const fs::path dir = stage_dir(work_, "train") / "models";
    fs::create_directories(dir);
    json users = json::array();
    for (const auto& [id, m] : models) {
      m.save((dir / (id + ".sdgm")).string());
      users.push_back(id);
    }
    write_manifest(work_, stamp("train"), {{"users", users}});
    out_ << "train: " << models.size() << " user models\n";
  }

  ScoreFile make_score_file(const std::string& stage, const std::string& method, const Inputs& in,
                            const Eigen::VectorXd& scores) const {
    std::vector<double> valid;
    for (Eigen::Index i = 0; i < scores.size(); ++i)
      if (!std::isnan(scores(i))) valid.push_back(scores(i));
    if (valid.empty()) throw ValidationError("no test reviews after the cutoff to score");
    ScoreFile f;
    f.provenance = stamp(stage);
    f.method = method;
    f.threshold = contamination_threshold(Eigen::Map<Eigen::VectorXd>(valid.data(), static_cast<Eigen::Index>(valid.size())),
                                          cfg_.detection.contamination);
    const auto labels = detect(scores, f.threshold);
    for (Eigen::Index i = 0; i < scores.size(); ++i)
      if (!std::isnan(scores(i)))
        f.records.push_back({in.dataset.reviews[static_cast<std::size_t>(i)].review_id, scores(i), labels[static_cast<std::size_t>(i)]});
    return f;
  }

  void score() {
    const auto manifest = require_stage(work_, "train", cfg_.hash());
    const auto in = inputs();
    const fs::path dir = stage_dir(work_, "train") / "models";
    std::map<std::string, AdcganModel> models;
    const auto catalogue_hash = Catalogue::standard().hash();
    for (const auto& id : manifest.at("details").at("users")) {
      const auto path = dir / (id.get<std::string>() + ".sdgm");
      auto m = AdcganModel::load(path.string());
      if (m.catalogue_hash() != catalogue_hash)
        throw ValidationError("model " + path.string() + " was trained with a different genre/region catalogue");
      AdcganConfig expected = cfg_.gan;
      expected.seed = m.config().seed;  // per-user seeds are derived
      if (m.config().hash() != expected.hash())
        throw ValidationError("model " + path.string() + " does not match the current gan config; rerun `train`");
      models.emplace(id.get<std::string>(), std::move(m));
    }
    const auto scores = score_with_models(models, in.users, in.vectors, in.conditions);
    const auto f = make_score_file("score", "adcgan", in, scores);
    write_scores(stage_dir(work_, "scores") / "adcgan.jsonl", f);
    write_manifest(work_, stamp("score"), {{"scored", f.records.size()}, {"threshold", f.threshold}});
    out_ << "score: " << f.records.size() << " test reviews scored\n";
  }

  void baseline(const std::string& name) {
    const Method m = parse_method(name);
    if (m == Method::adcgan) throw ValidationError("use `train` and `score` for adcgan");
    const auto in = inputs();
    const auto scores = score_test_rows(m, in.users, in.vectors, in.conditions, cfg_);
    const auto f = make_score_file("baseline", name, in, scores);
    write_scores(stage_dir(work_, "scores") / (name + ".jsonl"), f);
    out_ << "baseline " << name << ": " << f.records.size() << " test reviews scored\n";
  }

  void forensics() {
    require_stage(work_, "ingest", cfg_.hash());
    const Dataset d = dataset();
    const fs::path dir = stage_dir(work_, "forensics");
    json movies = json::array();
    for (const auto& s : spam_movie_scores(d, cfg_.forensics.score_granularity)) movies.push_back(s.to_json());
    write_json(dir / "movies.json", movies);

    std::map<std::string, std::vector<Review>> by_movie;
    for (const auto& r : d.reviews) by_movie[r.movie_id].push_back(r);
    json temporal = json::array();
    json ranks = json::array();
    std::size_t rank_skipped = 0;
    for (const auto& [id, rs] : by_movie) {
      const auto p = temporal_profile(rs, 86400, cfg_.forensics.spike_sigmas);
      bool spiked = false;
      for (const auto& day : p.days)
        for (bool s : day.spike) spiked |= s;
      temporal.push_back({{"movie_id", id}, {"spike", spiked}, {"days", p.to_json()}});
      auto rep = rank_discordance(rs);
      rank_skipped += rep.skipped;
      for (const auto& it : rep.items) {
        auto j = it.to_json();
        j["movie_id"] = id;
        ranks.push_back(j);
      }
    }
    std::stable_sort(ranks.begin(), ranks.end(),
                     [](const json& a, const json& b) { return a["suspicion"].get<long>() > b["suspicion"].get<long>(); });
    write_json(dir / "temporal.json", temporal);
    write_json(dir / "rank.json", {{"items", ranks}, {"skipped", rank_skipped}});
    json attitude = json::array();
    for (const auto& f : attitude_flags(d, cfg_.forensics.opposite_delta, cfg_.forensics.min_prior_ratings))
      attitude.push_back(f.to_json());
    std::stable_sort(attitude.begin(), attitude.end(),
                     [](const json& a, const json& b) { return a["delta"].get<double>() > b["delta"].get<double>(); });
    write_json(dir / "attitude.json", attitude);
    write_manifest(work_, stamp("forensics"), {{"movies", movies.size()}, {"attitude_flags", attitude.size()}});
    out_ << "forensics: " << movies.size() << " movies, " << attitude.size() << " attitude reversals\n";
  }

  void eval(const std::string& labels_path) {
    require_stage(work_, "ingest", cfg_.hash());
    const fs::path scores_dir = stage_dir(work_, "scores");
    std::vector<ScoreFile> files;
    for (Method m : {Method::adcgan, Method::lof, Method::iforest, Method::vae}) {
      const auto path = scores_dir / (std::string(to_string(m)) + ".jsonl");
      if (!fs::exists(path)) continue;
      auto f = read_scores(path, m == Method::adcgan ? "score" : "baseline");
      if (f.provenance.config_hash != cfg_.hash())
        throw ValidationError("refusing mixed provenance: " + path.string() + " was produced under config " +
                              hash_hex(f.provenance.config_hash) + ", current is " + hash_hex(cfg_.hash()));
      files.push_back(std::move(f));
    }
    if (files.empty()) throw MissingArtifactError("no score files in " + scores_dir.string() + "; run `score` first", "score");
    const auto labels = load_labels(labels_path.empty() ? corpus_ / "labels.jsonl" : fs::path(labels_path));

    std::vector<MethodResult> rows;
    json sweeps = json::object();
    for (const auto& f : files) {
      std::vector<Label> truth, pred;
      Eigen::VectorXd s(static_cast<Eigen::Index>(f.records.size()));
      for (std::size_t i = 0; i < f.records.size(); ++i) {
        auto it = labels.find(f.records[i].review_id);
        if (it == labels.end()) throw ValidationError("no label for review " + f.records[i].review_id);
        truth.push_back(it->second);
        pred.push_back(f.records[i].label);
        s(static_cast<Eigen::Index>(i)) = f.records[i].spam_score;
      }
      auto sweep = threshold_sweep(s, truth, 101);
      rows.push_back({f.method, metrics(truth, pred), sweep.auc});
      sweeps[f.method] = sweep.to_json();
    }
    const fs::path dir = stage_dir(work_, "eval");
    json report = stamp("eval").to_json();
    report["methods"] = metrics_table_json(rows);
    write_json(dir / "metrics.json", report);
    write_text(dir / "metrics.csv", metrics_table_csv(rows));
    write_json(dir / "sweep.json", sweeps);

    // Rating coherence of the review vectors.
    require_stage(work_, "embed", cfg_.hash());
    const Dataset d = dataset();
    const auto v = KeyedMatrix::load(stage_dir(work_, "embed") / "vectors.bin", "embed");
    std::vector<int> ratings;
    for (const auto& r : d.reviews) ratings.push_back(r.rating);
    if (ratings.size() == static_cast<std::size_t>(v.values.rows()) && ratings.size() > cfg_.coherence_k)
      write_json(dir / "coherence.json", nn_rating_coherence(v.values, ratings, cfg_.coherence_k).to_json());
    out_ << metrics_table_csv(rows);
  }

 private:
  PipelineConfig cfg_;
  std::ostream& out_;
  fs::path work_, corpus_;
};

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Unsupervised movie-review spam detection"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", o.config_path, "pipeline config (JSON)")->required();
    sub->add_option("--seed", o.seed, "override the config seed");
    sub->add_option("--work", o.work, "override the work directory");
    sub->add_option("--corpus", o.corpus, "override the corpus directory");
    sub->add_option("--threads", o.threads, "worker threads (0: all cores)");
    sub->add_option("--set", o.overrides, "override a config value, e.g. --set gan.epochs=500");
  };
  const std::vector<std::pair<std::string, std::string>> commands{
      {"synth", "generate a labelled synthetic corpus"},
      {"ingest", "validate the corpus"},
      {"train-embed", "train skip-gram word vectors and expand feature words"},
      {"embed", "attention-weighted SIF review vectors"},
      {"encode", "condition vectors"},
      {"train", "train one conditional GAN per user"},
      {"score", "spam scores from the trained models"},
      {"baseline", "spam scores from lof, iforest or vae"},
      {"forensics", "rating-distribution, temporal, rank and attitude reports"},
      {"eval", "metrics table, threshold sweeps and rating coherence"}};
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, help] : commands) {
    subs[name] = app.add_subcommand(name, help);
    add_common(subs[name]);
  }
  subs["baseline"]->add_option("-m,--method", o.method, "lof, iforest or vae")->required();
  subs["eval"]->add_option("--labels", o.labels, "ground-truth labels (default: <corpus>/labels.jsonl)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }

  try {
    Stages stages(load_config(o), out);
    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "synth") stages.synth();
    else if (cmd == "ingest") stages.ingest();
    else if (cmd == "train-embed") stages.train_embed();
    else if (cmd == "embed") stages.embed();
    else if (cmd == "encode") stages.encode();
    else if (cmd == "train") stages.train();
    else if (cmd == "score") stages.score();
    else if (cmd == "baseline") stages.baseline(o.method);
    else if (cmd == "forensics") stages.forensics();
    else if (cmd == "eval") stages.eval(o.labels);
    return kExitOk;
  } catch (const MissingArtifactError& e) {
    err << "error: " << e.what() << " (required stage: " << e.required_stage() << ")\n";
    return kExitMissingStage;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace spamdet
