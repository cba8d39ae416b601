#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "disagree/corpus.hpp"
#include "disagree/evaluation.hpp"
#include "disagree/predictions.hpp"
#include "disagree/tensor.hpp"

namespace disagree {

struct AnnotatorProfile {
  std::string worker_id;
  std::size_t item_count = 0;
  Matrix npmi;  // rows: worker label, cols: majority label
  double agreement_rate = 0.0;
  std::optional<std::size_t> cluster_id;

  nlohmann::json to_json() const;
};

/// nPMI of every cell of a joint count table, natural logs.
/// A zero row or column marginal gives 0, a zero joint gives -1 and a joint
/// probability of 1 gives +1.
Matrix npmi_from_counts(const Matrix& joint);

struct NpmiOptions {
  /// Exclude the profiled worker's own vote from the majority. Items left
  /// without other votes are skipped.
  bool leave_one_out = false;
};

/// Joint counts of (worker label, item majority label) over the worker's items.
Matrix worker_majority_counts(const std::string& worker_id, const Corpus& corpus, Level level = Level::two,
                              const NpmiOptions& options = {});

Matrix npmi_matrix(const std::string& worker_id, const Corpus& corpus, Level level = Level::two,
                   const NpmiOptions& options = {});

/// One profile per worker, ordered by worker id.
std::vector<AnnotatorProfile> profile_workers(const Corpus& corpus, Level level = Level::two,
                                              const NpmiOptions& options = {});

struct ClusterResult {
  std::size_t k = 0;
  std::vector<std::size_t> assignment;  // per input point
  std::vector<std::vector<double>> centroids;
  std::vector<std::size_t> sizes;
  double wcss = 0.0;
};

/// k-means++ seeding and Lloyd iterations, best of `restarts` by
/// within-cluster sum of squares. Cluster ids are in first-appearance order.
ClusterResult kmeans(const std::vector<std::vector<double>>& points, std::size_t k, std::uint64_t seed,
                     std::size_t restarts = 10, std::size_t max_iterations = 300);

struct WorkerClusters {
  ClusterResult clustering;
  std::vector<std::string> workers;
  std::vector<Matrix> mean_matrices;
  /// Mean diagonal nPMI per cluster; ids ascend with it, so cluster 0 holds
  /// the lowest-agreement workers.
  std::vector<double> mean_diagonal;

  nlohmann::json to_json() const;
};

/// Clusters flattened nPMI matrices and writes the cluster id into each profile.
WorkerClusters cluster_workers(std::vector<AnnotatorProfile>& profiles, std::size_t k = 3, std::uint64_t seed = 0,
                               std::size_t restarts = 10);

double adjusted_rand_index(std::span<const std::size_t> a, std::span<const std::size_t> b);

struct ConfusionMatrix {
  Level level = Level::one;
  Matrix counts;          // rows: predicted or worker label, cols: reference label
  Matrix row_normalized;  // rows with no pairs stay zero

  nlohmann::json to_json() const;
};

/// Pairs of ordinals at `from`, tallied after projection to `to`.
ConfusionMatrix confusion_matrix(std::span<const std::size_t> rows, std::span<const std::size_t> cols, Level from,
                                 Level to, const Taxonomy& taxonomy);

/// Annotator-specific scores restricted to each named subset of workers.
std::map<std::string, HardMetricReport> subgroup_report(const PredictionSet& preds, const Corpus& corpus,
                                                        Level level,
                                                        const std::map<std::string, std::vector<std::string>>& subsets,
                                                        const EvalOptions& options = {});

/// Comma-separated table with a header row of column labels and a leading
/// column of row labels.
void write_matrix_table(std::ostream& out, const Matrix& matrix, const std::vector<std::string>& row_labels,
                        const std::vector<std::string>& col_labels);

}  // namespace disagree
