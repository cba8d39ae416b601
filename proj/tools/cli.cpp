#include "cli.hpp"

#include <cctype>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "disagree/config.hpp"
#include "disagree/corpus.hpp"
#include "disagree/error.hpp"
#include "disagree/models.hpp"
#include "disagree/perspectives.hpp"
#include "disagree/pipeline.hpp"
#include "disagree/predictions.hpp"
#include "disagree/synthgen.hpp"

namespace disagree::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kOutEnv = "DISAGREE_OUT";
constexpr const char* kDefaultOut = "disagree_out";

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> level;
  std::optional<std::string> kind;
  std::vector<std::string> adapters;
  std::optional<std::string> out;
  std::optional<std::string> taxonomy;
  std::optional<std::string> annotations;
  std::optional<std::string> items;
  std::optional<std::string> model;
  std::vector<std::string> predictions;
  std::string split = "test";
  bool save_models = false;
};

class Logger {
 public:
  explicit Logger(std::ostream& log) : log_(log) {}
  void operator()(const json& event) const { log_ << event.dump() << '\n'; }

 private:
  std::ostream& log_;
};

class Stopwatch {
 public:
  long long ms() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

RunConfig resolve_config(const Flags& flags) {
  RunConfig config = flags.config.empty() ? RunConfig{} : RunConfig::load_file(flags.config);
  if (flags.seed) {
    config.seed = *flags.seed;
    config.synth.seed = *flags.seed;
  }
  if (flags.level) config.level = level_from_int(*flags.level);
  if (flags.kind) config.kind = model_kind_from_string(*flags.kind);
  if (flags.taxonomy) config.paths.taxonomy = *flags.taxonomy;
  if (flags.annotations) config.paths.annotations = *flags.annotations;
  if (flags.items) config.paths.items = *flags.items;
  if (flags.model) config.paths.model = *flags.model;
  if (flags.out) config.paths.out = *flags.out;
  if (config.paths.out.empty()) {
    const char* env = std::getenv(kOutEnv);
    config.paths.out = env && *env ? env : kDefaultOut;
  }
  return config;
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ValidationError("missing input: " + what + " path is required");
  if (!fs::is_regular_file(path)) throw ValidationError("missing input: " + what + " file '" + path + "' not found");
}

std::ifstream open_input(const std::string& path, const std::string& what) {
  require_file(path, what);
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + what + " file '" + path + "'");
  return in;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

std::shared_ptr<const Taxonomy> load_taxonomy(const RunConfig& config) {
  if (config.paths.taxonomy.empty()) return std::make_shared<const Taxonomy>(Taxonomy::default_taxonomy());
  require_file(config.paths.taxonomy, "taxonomy");
  return std::make_shared<const Taxonomy>(Taxonomy::load_file(config.paths.taxonomy));
}

Corpus load_corpus(const RunConfig& config, bool require_text) {
  auto taxonomy = load_taxonomy(config);
  auto annotations = open_input(config.paths.annotations, "annotations");
  std::optional<std::ifstream> items;
  if (require_text || !config.paths.items.empty()) items = open_input(config.paths.items, "items");
  return ingest_annotations(annotations, taxonomy, std::nullopt, items ? &*items : nullptr, require_text);
}

Corpus split_of(const Corpus& corpus, const std::string& name) {
  if (name == "all") return corpus;
  auto part = corpus.subset(split_from_string(name));
  if (part.empty()) throw ValidationError("split '" + name + "' has no items");
  return part;
}

std::string lowercase(std::string_view text) {
  std::string out(text);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

json stamped(const RunConfig& config, json doc) {
  doc["config_hash"] = config.hash();
  doc["seed"] = config.seed;
  return doc;
}

std::string csv_header(const RunConfig& config) {
  return "# config_hash=" + config.hash() + ",seed=" + std::to_string(config.seed) + "\n";
}

int cmd_ingest(const RunConfig& config, std::ostream& out, const Logger& log) {
  Stopwatch watch;
  const auto corpus = load_corpus(config, false);
  const fs::path dir = config.paths.out;
  std::ostringstream ann, items;
  write_annotations(ann, corpus, provenance(config));
  write_item_texts(items, corpus, provenance(config));
  write_text(dir / "annotations.jsonl", ann.str());
  write_text(dir / "items.jsonl", items.str());
  json summary = stamped(config, {{"items", corpus.size()},
                                  {"records", corpus.record_count()},
                                  {"workers", corpus.workers().size()},
                                  {"native_level", to_int(corpus.native_level())}});
  out << summary.dump() << '\n';
  log({{"event", "phase"}, {"phase", "ingest"}, {"items", corpus.size()}, {"duration_ms", watch.ms()}});
  return 0;
}

int cmd_stats(const RunConfig& config, const Flags& flags, std::ostream& out, const Logger& log) {
  Stopwatch watch;
  const auto corpus = load_corpus(config, false);
  const auto stats = stamped(config, corpus_stats(corpus, config.level).to_json());
  out << stats.dump(2) << '\n';
  if (flags.out) write_text(fs::path(config.paths.out) / "stats.json", stats.dump(2) + "\n");
  log({{"event", "phase"}, {"phase", "stats"}, {"items", corpus.size()}, {"duration_ms", watch.ms()}});
  return 0;
}

int cmd_synth(const RunConfig& config, std::ostream& out, const Logger& log) {
  Stopwatch watch;
  auto spec = config.synth;
  spec.seed = config.seed;
  const auto synthetic = generate_corpus(spec, load_taxonomy(config));
  const fs::path dir = config.paths.out;
  std::ostringstream ann, items;
  write_annotations(ann, synthetic.corpus, provenance(config));
  write_item_texts(items, synthetic.corpus, provenance(config));
  write_text(dir / "annotations.jsonl", ann.str());
  write_text(dir / "items.jsonl", items.str());
  write_text(dir / "truth.json", stamped(config, synthetic.truth.to_json()).dump(2) + "\n");
  out << stamped(config, {{"items", synthetic.corpus.size()},
                          {"records", synthetic.corpus.record_count()},
                          {"workers", synthetic.corpus.workers().size()},
                          {"out", dir.string()}})
             .dump()
      << '\n';
  log({{"event", "phase"}, {"phase", "synth"}, {"items", synthetic.corpus.size()}, {"duration_ms", watch.ms()}});
  return 0;
}

int cmd_train(const RunConfig& config, std::ostream& out, const Logger& log) {
  Stopwatch watch;
  const auto corpus = load_corpus(config, true);
  const auto train_split = split_of(corpus, "train");
  const auto encoder = make_encoder(config.encoder);
  Model model = train(config.kind, train_split, *encoder, config.level, config.train, config.seed);
  model.set_config_hash(config.hash());
  const fs::path path = config.paths.model.empty()
                            ? fs::path(config.paths.out) / ("model_" + lowercase(to_string(config.kind)) + "_L" +
                                                            std::to_string(to_int(config.level)) + ".json")
                            : fs::path(config.paths.model);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  model.save(path.string());
  const auto& losses = model.trace().epoch_losses;
  for (std::size_t e = 0; e < losses.size(); ++e) {
    log({{"event", "metric"}, {"phase", "train"}, {"epoch", e + 1}, {"loss", losses[e]}});
  }
  out << stamped(config, {{"model", path.string()},
                          {"kind", to_string(config.kind)},
                          {"level", to_int(config.level)},
                          {"epoch_losses", losses}})
             .dump()
      << '\n';
  log({{"event", "phase"}, {"phase", "train"}, {"kind", to_string(config.kind)}, {"level", to_int(config.level)},
       {"duration_ms", watch.ms()}});
  return 0;
}

int cmd_predict(const RunConfig& config, const Flags& flags, std::ostream& out, const Logger& log) {
  Stopwatch watch;
  require_file(config.paths.model, "model");
  const Model model = Model::load(config.paths.model);
  const auto corpus = load_corpus(config, true);
  const auto part = split_of(corpus, flags.split);
  const auto encoder = make_encoder(config.encoder);
  const auto adapters = flags.adapters.empty() ? adapters_for(model.kind()) : flags.adapters;
  for (const auto& a : adapters) adapter_output(a);
  AdapterOptions options;
  options.aggregate_all_annotators = config.eval.aggregate_all_annotators;
  auto sets = run_adapters(model, part, *encoder, adapters, options);
  json written = json::array();
  for (auto& set : sets) {
    set.config_hash = config.hash();
    set.seed = config.seed;
    std::ostringstream text;
    set.write(text, corpus.taxonomy());
    const auto path = fs::path(config.paths.out) / (set.adapter + "_L" + std::to_string(to_int(set.level)) + ".jsonl");
    write_text(path, text.str());
    written.push_back(path.string());
  }
  out << stamped(config, {{"predictions", written}, {"items", part.size()}}).dump() << '\n';
  log({{"event", "phase"}, {"phase", "predict"}, {"adapters", adapters}, {"duration_ms", watch.ms()}});
  return 0;
}

std::vector<PredictionSet> load_predictions(const Flags& flags, const Taxonomy& taxonomy) {
  if (flags.predictions.empty()) throw ValidationError("missing input: at least one --predictions file is required");
  std::vector<PredictionSet> sets;
  for (const auto& path : flags.predictions) {
    auto in = open_input(path, "predictions");
    try {
      sets.push_back(PredictionSet::read(in, taxonomy));
    } catch (const ValidationError& e) {
      throw ValidationError(path + ": " + e.what());
    }
    sets.back().validate(taxonomy.size(sets.back().level));
  }
  return sets;
}

int cmd_evaluate(const RunConfig& config, const Flags& flags, std::ostream& out, const Logger& log) {
  Stopwatch watch;
  const auto corpus = load_corpus(config, false);
  const auto part = split_of(corpus, flags.split);
  const auto sets = load_predictions(flags, corpus.taxonomy());
  const auto entries = evaluate_prediction_sets(sets, part, config.eval, derive_seed(config.seed, "resample"));
  const fs::path dir = config.paths.out;
  const auto doc = stamped(config, {{"entries", entries}});
  write_text(dir / "metrics.json", doc.dump(2) + "\n");
  write_text(dir / "metrics.csv", csv_header(config) + metrics_table(entries));
  out << doc.dump(2) << '\n';
  for (const auto& e : entries) {
    log({{"event", "metric"}, {"task", e["task"]}, {"adapter", e["adapter"]}, {"level", e["level"]},
         {"metrics", e["metrics"]}});
  }
  log({{"event", "phase"}, {"phase", "evaluate"}, {"entries", entries.size()}, {"duration_ms", watch.ms()}});
  return 0;
}

int cmd_analyze(const RunConfig& config, const Flags& flags, std::ostream& out, const Logger& log) {
  Stopwatch watch;
  const auto corpus = load_corpus(config, false);
  auto analysis = analyze_workers(corpus, config.analysis, config.seed);
  const auto& tax = corpus.taxonomy();
  const fs::path dir = config.paths.out;
  json profiles = json::array();
  for (const auto& p : analysis.profiles) profiles.push_back(p.to_json());
  write_text(dir / "profiles.json", stamped(config, {{"level", to_int(config.analysis.npmi_level)},
                                                     {"labels", tax.labels(config.analysis.npmi_level)},
                                                     {"profiles", profiles}})
                                        .dump(2) +
                                        "\n");
  const auto clusters = stamped(config, analysis.clusters.to_json());
  write_text(dir / "clusters.json", clusters.dump(2) + "\n");
  for (std::size_t c = 0; c < analysis.clusters.mean_matrices.size(); ++c) {
    std::ostringstream npmi, conf;
    npmi << csv_header(config);
    write_matrix_table(npmi, analysis.clusters.mean_matrices[c], tax.labels(config.analysis.npmi_level),
                       tax.labels(config.analysis.npmi_level));
    conf << csv_header(config);
    write_matrix_table(conf, analysis.cluster_confusions[c].counts, tax.labels(config.analysis.confusion_level),
                       tax.labels(config.analysis.confusion_level));
    write_text(dir / ("npmi_cluster" + std::to_string(c) + ".csv"), npmi.str());
    write_text(dir / ("confusion_cluster" + std::to_string(c) + "_vs_majority.csv"), conf.str());
  }
  json subsets = json::object();
  for (const auto& [name, workers] : analysis.subsets) subsets[name] = workers;
  json reports = json::object();
  if (!flags.predictions.empty()) {
    const auto part = split_of(corpus, flags.split);
    EvalOptions options;
    options.include_absent_classes = config.eval.include_absent_classes;
    for (const auto& set : load_predictions(flags, tax)) {
      for (const auto& [name, r] : subgroup_report(set, part, set.level, analysis.subsets, options)) {
        reports["L" + std::to_string(to_int(set.level))][set.adapter][name] = {
            {"accuracy", r.accuracy}, {"macro_f1", r.macro_f1}, {"n_pairs", r.n_pairs}};
      }
    }
  }
  write_text(dir / "subgroups.json",
             stamped(config, {{"subsets", subsets}, {"median_items", analysis.prolificness.median}, {"reports", reports}})
                     .dump(2) +
                 "\n");
  out << clusters.dump(2) << '\n';
  log({{"event", "phase"}, {"phase", "analyze"}, {"workers", analysis.profiles.size()}, {"duration_ms", watch.ms()}});
  return 0;
}

int cmd_replicate(const RunConfig& config, const Flags& flags, std::ostream& out, const Logger& log) {
  Stopwatch watch;
  ReplicateOptions options;
  options.save_models = flags.save_models;
  const auto report = replicate(config, config.paths.out, options, [&log](const json& e) { log(e); });
  json summary = json::array();
  for (const auto& d : report["directions"]) summary.push_back({{"id", d["id"]}, {"holds", d["holds"]}});
  out << stamped(config, {{"report", (fs::path(config.paths.out) / "report.json").string()}, {"directions", summary}})
             .dump(2)
      << '\n';
  log({{"event", "phase"}, {"phase", "replicate"}, {"duration_ms", watch.ms()}});
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& log_stream) {
  Logger log(log_stream);
  Flags flags;
  CLI::App app{"Disagreement-aware discourse relation classifiers: train, evaluate and analyze.", "disagree"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  app.add_option("--config", flags.config, "Flat JSON run config")->check(CLI::ExistingFile);
  app.add_option("--seed", flags.seed, "Run seed");
  app.add_option("--level", flags.level, "Taxonomy level")->check(CLI::IsMember({1, 2, 3}));
  app.add_option("--kind", flags.kind, "Model kind")->check(CLI::IsMember({"st", "multi", "dist", "mt", "ae"}));
  app.add_option("--adapter", flags.adapters, "Adapter tag (repeatable)");
  app.add_option("--out", flags.out, std::string("Output directory (default $") + kOutEnv + " or " + kDefaultOut + ")");
  app.add_option("--taxonomy", flags.taxonomy, "Taxonomy file (default: shipped)");
  app.add_option("--annotations", flags.annotations, "Annotation records (JSON lines)");
  app.add_option("--items", flags.items, "Item texts (JSON lines)");
  app.add_option("--model", flags.model, "Model checkpoint");
  app.add_option("--predictions", flags.predictions, "Prediction file (repeatable)");
  app.add_option("--split", flags.split, "Split to predict or evaluate on")
      ->check(CLI::IsMember({"train", "dev", "test", "all"}));

  app.add_subcommand("ingest", "Validate annotation and item files and rewrite them normalized");
  app.add_subcommand("stats", "Corpus statistics at --level");
  app.add_subcommand("synth", "Generate a synthetic crowd-annotated corpus");
  app.add_subcommand("train", "Train one model kind on the train split");
  app.add_subcommand("predict", "Run adapters of a trained model");
  app.add_subcommand("evaluate", "Score prediction files on the three tasks");
  app.add_subcommand("analyze", "Worker nPMI profiles, clusters and subgroup reports");
  auto* rep = app.add_subcommand("replicate", "Full synthetic experiment with a consolidated report");
  rep->add_flag("--save-models", flags.save_models, "Also write model checkpoints");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    log({{"event", "error"}, {"kind", "usage"}, {"message", e.what()}});
    return 1;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    const RunConfig config = resolve_config(flags);
    log({{"event", "start"}, {"command", name}, {"config_hash", config.hash()}, {"seed", config.seed}});
    if (name == "ingest") return cmd_ingest(config, out, log);
    if (name == "stats") return cmd_stats(config, flags, out, log);
    if (name == "synth") return cmd_synth(config, out, log);
    if (name == "train") return cmd_train(config, out, log);
    if (name == "predict") return cmd_predict(config, flags, out, log);
    if (name == "evaluate") return cmd_evaluate(config, flags, out, log);
    if (name == "analyze") return cmd_analyze(config, flags, out, log);
    return cmd_replicate(config, flags, out, log);
  } catch (const ValidationError& e) {
    log({{"event", "error"}, {"kind", "validation"}, {"command", name}, {"message", e.what()}});
    return 1;
  } catch (const std::exception& e) {
    log({{"event", "error"}, {"kind", "internal"}, {"command", name}, {"message", e.what()}});
    return 2;
  }
}

}  // namespace disagree::cli
