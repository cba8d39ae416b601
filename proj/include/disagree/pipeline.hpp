#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "disagree/config.hpp"
#include "disagree/corpus.hpp"
#include "disagree/evaluation.hpp"
#include "disagree/perspectives.hpp"
#include "disagree/predictions.hpp"

namespace disagree {

/// Receives structured progress events (one JSON object each).
using EventSink = std::function<void(const nlohmann::json&)>;

/// Provenance fields stamped into every artifact.
nlohmann::json provenance(const RunConfig& config);

/// Baseline adapter a task's p-values are computed against.
std::string baseline_adapter(std::string_view task);

/// Scores every set on the tasks its adapter supports ("single_label",
/// "distribution", "annotator") over `test`, with resampled paired t-tests
/// against the task baseline when that baseline is among `sets`. Returns one
/// entry per (task, adapter, level).
nlohmann::json evaluate_prediction_sets(const std::vector<PredictionSet>& sets, const Corpus& test,
                                        const EvalConfig& config, std::uint64_t resample_seed);

/// Flat table of evaluation entries: task,level,adapter,metric,value,baseline,p_value.
std::string metrics_table(const nlohmann::json& entries);

struct AnalysisResult {
  std::vector<AnnotatorProfile> profiles;
  WorkerClusters clusters;
  WorkerSplit prolificness;
  /// Named worker subsets: prolificness halves and clusters.
  std::map<std::string, std::vector<std::string>> subsets;
  /// Worker label vs. item majority per cluster, at the confusion level.
  std::vector<ConfusionMatrix> cluster_confusions;
};

/// Profiles, clusters and worker subsets computed on `corpus`'s train split.
AnalysisResult analyze_workers(const Corpus& corpus, const AnalysisConfig& config, std::uint64_t seed);

struct ReplicateOptions {
  bool save_models = false;
};

/// Synthesize, train every kind at Levels 1 and 2, predict with every
/// adapter, evaluate the three tasks, profile and cluster workers, and write
/// the report bundle under `out_dir`. Returns the consolidated report.
nlohmann::json replicate(const RunConfig& config, const std::filesystem::path& out_dir,
                         const ReplicateOptions& options = {}, const EventSink& events = {});

/// Claims about relative adapter performance checked against the evaluation
/// and subgroup results of a replicate run.
nlohmann::json direction_checks(const nlohmann::json& evaluation, const nlohmann::json& subgroups);

}  // namespace disagree
