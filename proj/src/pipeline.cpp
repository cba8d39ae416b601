#include "disagree/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "disagree/error.hpp"
#include "disagree/models.hpp"
#include "disagree/rng.hpp"
#include "disagree/synthgen.hpp"

namespace disagree {

namespace {

constexpr const char* kTasks[] = {"single_label", "distribution", "annotator"};

bool task_applies(std::string_view task, AdapterOutput output) {
  if (task == "single_label") return output == AdapterOutput::label;
  if (task == "distribution") return output == AdapterOutput::distribution;
  return output == AdapterOutput::label || output == AdapterOutput::per_worker;
}

std::vector<std::string> task_metrics(std::string_view task) {
  if (task == "distribution") return {"ce", "jsd", "md", "ed"};
  return {"accuracy", "macro_f1"};
}

// Metric values of one task on an optional item subset.
struct TaskScore {
  std::map<std::string, double> metrics;
  std::size_t n_items = 0;
  std::size_t n_pairs = 0;
  std::vector<double> per_class_f1;
};

TaskScore score_task(std::string_view task, const PredictionSet& set, const Corpus& test, const EvalConfig& config,
                     std::optional<std::span<const std::size_t>> subset) {
  EvalOptions options;
  options.include_absent_classes = config.include_absent_classes;
  TaskScore out;
  if (task == "distribution") {
    const auto r = eval_distribution(set, test, set.level, subset);
    out.metrics = {{"ce", r.ce}, {"jsd", r.jsd}, {"md", r.md}, {"ed", r.ed}};
    out.n_items = r.n_items;
    out.n_pairs = r.n_items;
    return out;
  }
  const auto r = task == "single_label" ? eval_single_label(set, test, set.level, options, subset)
                                        : eval_annotator_specific(set, test, set.level, options, subset);
  out.metrics = {{"accuracy", r.accuracy}, {"macro_f1", r.macro_f1}};
  out.n_items = r.n_items;
  out.n_pairs = r.n_pairs;
  out.per_class_f1 = r.per_class_f1;
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << content;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) { write_file(path, doc.dump(2) + "\n"); }

std::string csv_header(const RunConfig& config) {
  return "# config_hash=" + config.hash() + ",seed=" + std::to_string(config.seed) + "\n";
}

std::string matrix_csv(const RunConfig& config, const Matrix& m, const std::vector<std::string>& rows,
                       const std::vector<std::string>& cols) {
  std::ostringstream out;
  out << csv_header(config);
  write_matrix_table(out, m, rows, cols);
  return out.str();
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  long long ms() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

const nlohmann::json* find_entry(const nlohmann::json& entries, std::string_view task, std::string_view adapter,
                                 int level) {
  for (const auto& e : entries) {
    if (e["task"] == task && e["adapter"] == adapter && e["level"] == level) return &e;
  }
  return nullptr;
}

std::optional<double> metric(const nlohmann::json& entries, std::string_view task, std::string_view adapter, int level,
                             const char* name) {
  const auto* e = find_entry(entries, task, adapter, level);
  if (!e) return std::nullopt;
  return (*e)["metrics"][name].get<double>();
}

std::optional<double> subgroup_accuracy(const nlohmann::json& subgroups, int level, const char* adapter,
                                        const std::string& subset) {
  const auto key = "L" + std::to_string(level);
  if (!subgroups.contains(key) || !subgroups[key].contains(adapter) || !subgroups[key][adapter].contains(subset)) {
    return std::nullopt;
  }
  return subgroups[key][adapter][subset]["accuracy"].get<double>();
}

}  // namespace

nlohmann::json provenance(const RunConfig& config) {
  return nlohmann::json{{"config_hash", config.hash()}, {"seed", config.seed}};
}

std::string baseline_adapter(std::string_view task) { return task == "distribution" ? "ST.logit" : "ST.top1"; }

nlohmann::json evaluate_prediction_sets(const std::vector<PredictionSet>& sets, const Corpus& test,
                                        const EvalConfig& config, std::uint64_t resample_seed) {
  const auto plan = make_resamples(test.size(), config.resamples, config.resample_fraction, resample_seed);
  struct Scored {
    const PredictionSet* set;
    std::string task;
    TaskScore full;
    std::map<std::string, std::vector<double>> resampled;
  };
  std::vector<Scored> scored;
  for (const auto& set : sets) {
    const auto output = adapter_output(set.adapter);
    for (const char* task : kTasks) {
      if (!task_applies(task, output)) continue;
      Scored s{&set, task, score_task(task, set, test, config, std::nullopt), {}};
      for (const auto& subset : plan.subsets) {
        const auto r = score_task(task, set, test, config, std::span<const std::size_t>(subset));
        for (const auto& [name, value] : r.metrics) s.resampled[name].push_back(value);
      }
      scored.push_back(std::move(s));
    }
  }
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& s : scored) {
    nlohmann::json entry{{"task", s.task},
                         {"adapter", s.set->adapter},
                         {"level", to_int(s.set->level)},
                         {"metrics", s.full.metrics},
                         {"n_items", s.full.n_items},
                         {"n_pairs", s.full.n_pairs},
                         {"resample_seed", resample_seed},
                         {"resamples", plan.subsets.size()},
                         {"config_hash", s.set->config_hash},
                         {"seed", s.set->seed}};
    if (!s.full.per_class_f1.empty()) entry["per_class_f1"] = s.full.per_class_f1;
    const auto baseline = baseline_adapter(s.task);
    entry["baseline"] = baseline;
    nlohmann::json p_values = nlohmann::json::object();
    for (const auto& b : scored) {
      if (b.task != s.task || b.set->adapter != baseline || b.set->level != s.set->level) continue;
      if (b.set == s.set) break;
      for (const auto& name : task_metrics(s.task)) {
        p_values[name] = resampled_paired_ttest(s.resampled.at(name), b.resampled.at(name));
      }
    }
    entry["p_values"] = p_values;
    entries.push_back(std::move(entry));
  }
  return entries;
}

std::string metrics_table(const nlohmann::json& entries) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "task,level,adapter,metric,value,baseline,p_value\n";
  for (const auto& e : entries) {
    for (const auto& [name, value] : e["metrics"].items()) {
      out << e["task"].get<std::string>() << ',' << e["level"].get<int>() << ',' << e["adapter"].get<std::string>()
          << ',' << name << ',' << value.get<double>() << ',' << e["baseline"].get<std::string>() << ',';
      if (e["p_values"].contains(name)) out << e["p_values"][name].get<double>();
      out << '\n';
    }
  }
  return out.str();
}

AnalysisResult analyze_workers(const Corpus& corpus, const AnalysisConfig& config, std::uint64_t seed) {
  const Corpus train = corpus.subset(Split::train);
  const auto& tax = corpus.taxonomy();
  AnalysisResult out;
  out.profiles = profile_workers(train, config.npmi_level, NpmiOptions{config.leave_one_out});
  out.clusters = cluster_workers(out.profiles, config.clusters, derive_seed(seed, "clusters"), config.restarts);
  out.prolificness = split_workers_by_median(corpus);
  out.subsets["low_prolific"] = out.prolificness.low;
  if (!out.prolificness.high.empty()) out.subsets["high_prolific"] = out.prolificness.high;
  for (std::size_t c = 0; c < config.clusters; ++c) {
    std::vector<std::string> members;
    for (const auto& p : out.profiles) {
      if (p.cluster_id == c) members.push_back(p.worker_id);
    }
    if (!members.empty()) out.subsets["cluster" + std::to_string(c)] = std::move(members);
  }

  std::map<std::string, std::size_t> cluster_of;
  for (const auto& p : out.profiles) cluster_of[p.worker_id] = *p.cluster_id;
  std::vector<std::vector<std::size_t>> rows(config.clusters), cols(config.clusters);
  const auto& priors = corpus.priors(config.npmi_level);
  for (const auto& item : train.items()) {
    const auto maj = majority_label(item, config.npmi_level, tax, priors);
    for (const auto& rec : item.annotations) {
      const auto c = cluster_of.at(rec.worker_id);
      rows[c].push_back(tax.project(rec.level, rec.ordinal, config.npmi_level));
      cols[c].push_back(maj);
    }
  }
  for (std::size_t c = 0; c < config.clusters; ++c) {
    out.cluster_confusions.push_back(
        confusion_matrix(rows[c], cols[c], config.npmi_level, config.confusion_level, tax));
  }
  return out;
}

nlohmann::json direction_checks(const nlohmann::json& evaluation, const nlohmann::json& subgroups) {
  nlohmann::json checks = nlohmann::json::array();
  auto add = [&checks](std::string id, std::string claim, std::optional<bool> holds, nlohmann::json values) {
    checks.push_back({{"id", std::move(id)},
                      {"claim", std::move(claim)},
                      {"holds", holds ? nlohmann::json(*holds) : nlohmann::json(nullptr)},
                      {"values", std::move(values)}});
  };
  for (int level : {1, 2}) {
    const auto lv = "L" + std::to_string(level);
    {
      const auto d = metric(evaluation, "single_label", "dist.top1", level, "macro_f1");
      const auto s = metric(evaluation, "single_label", "ST.top1", level, "macro_f1");
      add("single_label_soft_training_" + lv, "dist.top1 macro-F1 is at least ST.top1 macro-F1 at " + lv,
          d && s ? std::optional<bool>(*d >= *s) : std::nullopt, {{"dist.top1", d.value_or(0.0)}, {"ST.top1", s.value_or(0.0)}});
    }
    {
      const auto d = metric(evaluation, "distribution", "label-dist", level, "jsd");
      const auto s = metric(evaluation, "distribution", "ST.logit", level, "jsd");
      add("distribution_label_dist_" + lv, "label-dist JSD is below ST.logit JSD at " + lv,
          d && s ? std::optional<bool>(*d < *s) : std::nullopt, {{"label-dist", d.value_or(0.0)}, {"ST.logit", s.value_or(0.0)}});
    }
    {
      const auto a = metric(evaluation, "annotator", "AE", level, "accuracy");
      const auto s = metric(evaluation, "annotator", "ST.top1", level, "accuracy");
      add("annotator_ae_" + lv, "AE annotator-specific accuracy exceeds ST.top1 at " + lv,
          a && s ? std::optional<bool>(*a > *s) : std::nullopt, {{"AE", a.value_or(0.0)}, {"ST.top1", s.value_or(0.0)}});
    }
    {
      const auto m = metric(evaluation, "annotator", "MT", level, "accuracy");
      const auto a = metric(evaluation, "annotator", "AE", level, "accuracy");
      add("annotator_mt_" + lv, "MT annotator-specific accuracy is below AE at " + lv,
          m && a ? std::optional<bool>(*m < *a) : std::nullopt, {{"MT", m.value_or(0.0)}, {"AE", a.value_or(0.0)}});
    }
    {
      const auto lo = subgroup_accuracy(subgroups, level, "AE", "cluster0");
      std::optional<double> hi;
      for (int c = 9; c > 0 && !hi; --c) hi = subgroup_accuracy(subgroups, level, "AE", "cluster" + std::to_string(c));
      add("subgroup_agreement_" + lv, "AE accuracy on the lowest-agreement cluster is below the highest at " + lv,
          lo && hi ? std::optional<bool>(*lo < *hi) : std::nullopt, {{"low", lo.value_or(0.0)}, {"high", hi.value_or(0.0)}});
    }
    {
      const auto lo = subgroup_accuracy(subgroups, level, "AE", "low_prolific");
      const auto hi = subgroup_accuracy(subgroups, level, "AE", "high_prolific");
      add("subgroup_prolificness_" + lv, "AE accuracy differs by at most 0.05 between prolificness halves at " + lv,
          lo && hi ? std::optional<bool>(std::abs(*lo - *hi) <= 0.05) : std::nullopt,
          {{"low", lo.value_or(0.0)}, {"high", hi.value_or(0.0)}});
    }
  }
  {
    const auto a1 = metric(evaluation, "annotator", "AE", 1, "accuracy");
    const auto s1 = metric(evaluation, "annotator", "ST.top1", 1, "accuracy");
    const auto a2 = metric(evaluation, "annotator", "AE", 2, "accuracy");
    const auto s2 = metric(evaluation, "annotator", "ST.top1", 2, "accuracy");
    std::optional<bool> holds;
    if (a1 && s1 && a2 && s2) holds = (*a1 - *a2) > (*s1 - *s2);
    add("annotator_granularity", "AE accuracy drops more than ST.top1 accuracy from L1 to L2", holds,
        {{"AE_drop", a1 && a2 ? *a1 - *a2 : 0.0}, {"ST.top1_drop", s1 && s2 ? *s1 - *s2 : 0.0}});
  }
  {
    const auto a1 = metric(evaluation, "distribution", "AE.logit", 1, "jsd");
    const auto d1 = metric(evaluation, "distribution", "label-dist", 1, "jsd");
    const auto a2 = metric(evaluation, "distribution", "AE.logit", 2, "jsd");
    const auto d2 = metric(evaluation, "distribution", "label-dist", 2, "jsd");
    std::optional<bool> holds;
    if (a1 && d1 && a2 && d2) holds = *a1 < *d1 && *a2 >= *d2;
    add("distribution_ae_logit_granularity", "AE.logit JSD beats label-dist at L1 but not at L2", holds,
        {{"AE.logit_L1", a1.value_or(0.0)},
         {"label-dist_L1", d1.value_or(0.0)},
         {"AE.logit_L2", a2.value_or(0.0)},
         {"label-dist_L2", d2.value_or(0.0)}});
  }
  return checks;
}

nlohmann::json replicate(const RunConfig& config, const std::filesystem::path& out_dir, const ReplicateOptions& options,
                         const EventSink& events) {
  auto emit = [&events](nlohmann::json event) {
    if (events) events(event);
  };
  const auto prov = provenance(config);
  // The bundle's own location is not part of its content.
  auto recorded = config;
  recorded.paths.out.clear();
  const auto stamp = [&prov](nlohmann::json doc) {
    doc["config_hash"] = prov["config_hash"];
    doc["seed"] = prov["seed"];
    return doc;
  };

  // synthesize
  Stopwatch watch;
  auto spec = config.synth;
  spec.seed = config.seed;
  std::shared_ptr<const Taxonomy> taxonomy = config.paths.taxonomy.empty()
                                                 ? std::make_shared<const Taxonomy>(Taxonomy::default_taxonomy())
                                                 : std::make_shared<const Taxonomy>(Taxonomy::load_file(config.paths.taxonomy));
  auto synthetic = generate_corpus(spec, taxonomy);
  const Corpus& corpus = synthetic.corpus;
  {
    std::ostringstream ann, items;
    write_annotations(ann, corpus, prov);
    write_item_texts(items, corpus, prov);
    write_file(out_dir / "corpus" / "annotations.jsonl", ann.str());
    write_file(out_dir / "corpus" / "items.jsonl", items.str());
    write_json(out_dir / "corpus" / "truth.json", stamp(synthetic.truth.to_json()));
  }
  nlohmann::json run_doc = stamp({{"format", "disagree-run"}, {"config", recorded.to_json()}});
  write_json(out_dir / "run_config.json", run_doc);
  emit({{"event", "phase"}, {"phase", "synth"}, {"items", corpus.size()}, {"duration_ms", watch.ms()}});

  const Corpus train_split = corpus.subset(Split::train);
  const Corpus test_split = corpus.subset(Split::test);
  nlohmann::json stats = nlohmann::json::object();
  for (Level lv : {Level::one, Level::two}) {
    stats["L" + std::to_string(to_int(lv))] = corpus_stats(corpus, lv).to_json();
  }
  stats["splits"] = {{"train", train_split.size()},
                     {"dev", corpus.subset(Split::dev).size()},
                     {"test", test_split.size()}};
  write_json(out_dir / "corpus" / "stats.json", stamp(stats));

  // train and predict
  const auto encoder = make_encoder(config.encoder);
  AdapterOptions adapter_options;
  adapter_options.aggregate_all_annotators = config.eval.aggregate_all_annotators;
  std::vector<PredictionSet> all_sets;
  nlohmann::json training = nlohmann::json::array();
  for (Level lv : {Level::one, Level::two}) {
    for (ModelKind kind : {ModelKind::st, ModelKind::multi, ModelKind::dist, ModelKind::mt, ModelKind::ae}) {
      Stopwatch tw;
      Model model = train(kind, train_split, *encoder, lv, config.train, config.seed);
      model.set_config_hash(prov["config_hash"].get<std::string>());
      const auto lv_name = "L" + std::to_string(to_int(lv));
      emit({{"event", "phase"},
            {"phase", "train"},
            {"kind", to_string(kind)},
            {"level", to_int(lv)},
            {"final_loss", model.trace().epoch_losses.back()},
            {"duration_ms", tw.ms()}});
      training.push_back({{"kind", to_string(kind)},
                          {"level", to_int(lv)},
                          {"epoch_losses", model.trace().epoch_losses}});
      if (options.save_models) {
        std::filesystem::create_directories(out_dir / "models");
        model.save((out_dir / "models" / (std::string(to_string(kind)) + "_" + lv_name + ".json")).string());
      }
      Stopwatch pw;
      auto sets = run_adapters(model, test_split, *encoder, adapters_for(kind), adapter_options);
      for (auto& set : sets) {
        std::ostringstream out;
        set.write(out, *taxonomy);
        write_file(out_dir / "predictions" / lv_name / (set.adapter + ".jsonl"), out.str());
        all_sets.push_back(std::move(set));
      }
      emit({{"event", "phase"},
            {"phase", "predict"},
            {"kind", to_string(kind)},
            {"level", to_int(lv)},
            {"duration_ms", pw.ms()}});
    }
  }

  // evaluate
  watch = Stopwatch();
  const auto resample_seed = derive_seed(config.seed, "resample");
  const auto evaluation = evaluate_prediction_sets(all_sets, test_split, config.eval, resample_seed);
  write_json(out_dir / "evaluation" / "metrics.json", stamp({{"entries", evaluation}}));
  write_file(out_dir / "evaluation" / "metrics.csv", csv_header(config) + metrics_table(evaluation));
  emit({{"event", "phase"}, {"phase", "evaluate"}, {"entries", evaluation.size()}, {"duration_ms", watch.ms()}});

  // analyze
  watch = Stopwatch();
  auto analysis = analyze_workers(corpus, config.analysis, config.seed);
  nlohmann::json profiles = nlohmann::json::array();
  for (const auto& p : analysis.profiles) profiles.push_back(p.to_json());
  write_json(out_dir / "analysis" / "profiles.json",
             stamp({{"level", to_int(config.analysis.npmi_level)},
                    {"labels", taxonomy->labels(config.analysis.npmi_level)},
                    {"profiles", profiles}}));
  write_json(out_dir / "analysis" / "clusters.json", stamp(analysis.clusters.to_json()));
  const auto& npmi_labels = taxonomy->labels(config.analysis.npmi_level);
  const auto& conf_labels = taxonomy->labels(config.analysis.confusion_level);
  for (std::size_t c = 0; c < analysis.clusters.mean_matrices.size(); ++c) {
    const auto name = "cluster" + std::to_string(c);
    write_file(out_dir / "analysis" / ("npmi_" + name + ".csv"),
               matrix_csv(config, analysis.clusters.mean_matrices[c], npmi_labels, npmi_labels));
    write_file(out_dir / "analysis" / ("confusion_" + name + "_vs_majority.csv"),
               matrix_csv(config, analysis.cluster_confusions[c].counts, conf_labels, conf_labels));
  }

  EvalOptions eval_options;
  eval_options.include_absent_classes = config.eval.include_absent_classes;
  nlohmann::json subgroups = nlohmann::json::object();
  for (const auto& set : all_sets) {
    if (set.adapter != "AE" && set.adapter != "MT" && set.adapter != "ST.top1") continue;
    const auto lv_name = "L" + std::to_string(to_int(set.level));
    const auto reports = subgroup_report(set, test_split, set.level, analysis.subsets, eval_options);
    for (const auto& [name, r] : reports) {
      subgroups[lv_name][set.adapter][name] = {
          {"accuracy", r.accuracy}, {"macro_f1", r.macro_f1}, {"n_pairs", r.n_pairs}};
    }
    // worker-specific predictions against each worker's own label
    const auto pairs = annotator_pairs(set, test_split, set.level);
    if (to_int(set.level) < to_int(config.analysis.confusion_level)) continue;
    const auto conf = confusion_matrix(pairs.predicted, pairs.gold, set.level, config.analysis.confusion_level, *taxonomy);
    write_file(out_dir / "analysis" / ("confusion_" + set.adapter + "_" + lv_name + ".csv"),
               matrix_csv(config, conf.counts, conf_labels, conf_labels));
  }
  nlohmann::json subsets_doc = nlohmann::json::object();
  for (const auto& [name, workers] : analysis.subsets) subsets_doc[name] = workers;
  write_json(out_dir / "analysis" / "subgroups.json",
             stamp({{"subsets", subsets_doc}, {"median_items", analysis.prolificness.median}, {"reports", subgroups}}));
  emit({{"event", "phase"}, {"phase", "analyze"}, {"workers", analysis.profiles.size()}, {"duration_ms", watch.ms()}});

  nlohmann::json cluster_summary = nlohmann::json::array();
  for (std::size_t c = 0; c < analysis.clusters.clustering.k; ++c) {
    cluster_summary.push_back({{"cluster_id", c},
                               {"size", analysis.clusters.clustering.sizes[c]},
                               {"mean_diagonal", analysis.clusters.mean_diagonal[c]}});
  }
  nlohmann::json report = stamp({{"format", "disagree-report"},
                                 {"version", 1},
                                 {"config", recorded.to_json()},
                                 {"corpus", stats},
                                 {"training", training},
                                 {"evaluation", evaluation},
                                 {"clusters", cluster_summary},
                                 {"subgroups", subgroups},
                                 {"directions", direction_checks(evaluation, subgroups)}});
  write_json(out_dir / "report.json", report);
  emit({{"event", "done"}, {"report", (out_dir / "report.json").string()}});
  return report;
}

}  // namespace disagree
