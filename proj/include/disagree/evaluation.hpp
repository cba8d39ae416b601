#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "disagree/corpus.hpp"
#include "disagree/distribution.hpp"
#include "disagree/predictions.hpp"

namespace disagree {

/// Mean soft metrics. CE uses natural logs with predictions floored at 1e-12;
/// JSD uses base-2 logs so it lies in [0, 1].
struct SoftMetricReport {
  double ce = 0.0;
  double jsd = 0.0;
  double md = 0.0;
  double ed = 0.0;
  std::size_t n_items = 0;

  nlohmann::json to_json() const;
};

struct HardMetricReport {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::vector<double> per_class_f1;
  std::vector<std::size_t> support;          // gold count per class
  std::vector<std::size_t> predicted_count;  // predictions per class
  std::size_t n_items = 0;
  std::size_t n_pairs = 0;

  nlohmann::json to_json() const;
};

struct SoftMetrics {
  double ce;
  double jsd;
  double md;
  double ed;
};

/// Per-item metrics of `pred` against `gold` (same length).
SoftMetrics soft_metrics(std::span<const double> pred, std::span<const double> gold);

struct EvalOptions {
  /// Count classes absent from both gold and predictions as F1 = 0 in the
  /// macro average (excluded by default).
  bool include_absent_classes = false;
};

/// Accuracy and macro-F1 from paired ordinals.
HardMetricReport hard_metrics(std::span<const std::size_t> gold, std::span<const std::size_t> predicted,
                              std::size_t num_classes, const EvalOptions& options = {});

/// Reference = majority label per item. Restricted to `item_subset`
/// (indices into corpus.items()) when given.
HardMetricReport eval_single_label(const PredictionSet& preds, const Corpus& corpus, Level level,
                                   const EvalOptions& options = {},
                                   std::optional<std::span<const std::size_t>> item_subset = std::nullopt);

/// Reference = empirical distribution per item.
SoftMetricReport eval_distribution(const PredictionSet& preds, const Corpus& corpus, Level level,
                                   std::optional<std::span<const std::size_t>> item_subset = std::nullopt);

/// Every (item, worker) annotation is one instance. Per-worker predictions
/// use the argmax of that worker's distribution; item-level labels are
/// replicated to every worker of the item. `worker_filter` restricts the
/// pairs counted.
HardMetricReport eval_annotator_specific(const PredictionSet& preds, const Corpus& corpus, Level level,
                                         const EvalOptions& options = {},
                                         std::optional<std::span<const std::size_t>> item_subset = std::nullopt,
                                         const std::function<bool(const std::string&)>& worker_filter = {});

/// The (gold, predicted) label pairs scored by eval_annotator_specific.
struct AnnotatorPairs {
  std::vector<std::string> workers;
  std::vector<std::size_t> gold;
  std::vector<std::size_t> predicted;
};
AnnotatorPairs annotator_pairs(const PredictionSet& preds, const Corpus& corpus, Level level);

/// Shared item subsamples for paired comparisons.
struct ResamplePlan {
  std::uint64_t seed = 0;
  double fraction = 0.8;
  std::vector<std::vector<std::size_t>> subsets;
};

/// `count` subsets of round(fraction * n_items) indices drawn without replacement.
ResamplePlan make_resamples(std::size_t n_items, std::size_t count = 30, double fraction = 0.8,
                            std::uint64_t seed = 0);

/// Two-sided paired t-test on per-resample score differences. Zero variance
/// gives p = 1 when the mean difference is zero and p = 0 otherwise.
double resampled_paired_ttest(std::span<const double> scores_a, std::span<const double> scores_b);

}  // namespace disagree
