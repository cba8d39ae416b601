#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "disagree/corpus.hpp"
#include "disagree/distribution.hpp"
#include "disagree/encoders.hpp"
#include "disagree/tensor.hpp"

namespace disagree {

/// ST: single truth (majority label, cross-entropy).
/// MULTI: multi-label BCE against labels holding >= threshold of the votes.
/// DIST: KL divergence against the full annotation distribution.
/// MT: shared trunk with one softmax head per annotator, summed cross-entropy.
/// AE: annotator and annotation embeddings mixed into the text representation.
enum class ModelKind { st, multi, dist, mt, ae };

std::string_view to_string(ModelKind kind);
/// Accepts "st", "ST", "multi", "dist", "label-dist", "mt", "ae" (case-insensitive).
ModelKind model_kind_from_string(std::string_view name);
bool is_perspectivist(ModelKind kind);

struct TrainConfig {
  std::size_t hidden = 256;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  AdamConfig adam;
  double multilabel_threshold = 0.2;
  // AE mixing weights: initial values and whether they are trained.
  double ae_w_text = 1.0;
  double ae_w_annotator = 1.0;
  double ae_w_annotation = 1.0;
  bool ae_freeze_mixing = false;

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& doc);
};

struct TrainingTrace {
  std::vector<double> batch_losses;
  std::vector<double> epoch_losses;  // mean of that epoch's batch losses
};

/// Trained parameter bundle of one model kind plus everything needed to
/// predict with it.
class Model {
 public:
  ModelKind kind() const { return kind_; }
  Level level() const { return level_; }
  std::size_t num_labels() const { return num_labels_; }
  std::size_t input_dim() const { return input_dim_; }
  const TrainConfig& config() const { return config_; }
  const ParamStore& params() const { return params_; }
  ParamStore& mutable_params() { return params_; }
  const std::vector<std::string>& workers() const { return workers_; }
  std::optional<std::size_t> worker_ordinal(std::string_view worker_id) const;
  const LabelPriors& priors() const { return priors_; }
  const std::string& encoder_fingerprint() const { return encoder_fingerprint_; }
  const TrainingTrace& trace() const { return trace_; }
  std::uint64_t seed() const { return seed_; }
  const std::string& config_hash() const { return config_hash_; }
  void set_config_hash(std::string hash) { config_hash_ = std::move(hash); }

  /// Item-level logits (ST, MULTI, DIST).
  Vector logits(const SparseVector& x) const;
  /// Logits of one annotator (MT head, or AE mixed representation).
  Vector annotator_logits(const SparseVector& x, std::size_t worker) const;
  /// Annotator logits for several workers sharing one trunk evaluation.
  std::vector<Vector> annotator_logits(const SparseVector& x, std::span<const std::size_t> workers) const;

  /// Checkpoint: parameter arrays plus manifest {kind, level, worker_index,
  /// encoder fingerprint, priors, config hash, seed}.
  nlohmann::json to_json() const;
  static Model from_json(const nlohmann::json& doc);
  void save(const std::string& path) const;
  static Model load(const std::string& path);

  friend class TrainingObjective;
  friend Model train(ModelKind, const Corpus&, const Encoder&, Level, const TrainConfig&, std::uint64_t);

 private:
  ModelKind kind_ = ModelKind::st;
  Level level_ = Level::two;
  std::size_t num_labels_ = 0;
  std::size_t input_dim_ = 0;
  TrainConfig config_;
  ParamStore params_;
  std::vector<std::string> workers_;
  std::unordered_map<std::string, std::size_t> worker_index_;
  Matrix worker_label_freq_;  // AE only: labels x workers, columns sum to 1
  LabelPriors priors_;
  std::string encoder_fingerprint_;
  TrainingTrace trace_;
  std::uint64_t seed_ = 0;
  std::string config_hash_;
};

/// Training loss of one model kind over a fixed, pre-encoded training set.
///
/// Exposed so the full backward pass can be checked against finite
/// differences; `train` drives the same object.
class TrainingObjective {
 public:
  TrainingObjective(ModelKind kind, const Corpus& train, const Encoder& encoder, Level level,
                    const TrainConfig& config);

  /// Fresh parameters, initialized from `rng` in a fixed order.
  Model initial_model(Rng& rng) const;

  std::size_t instance_count() const { return inputs_.size(); }

  /// Mean batch loss; accumulates the gradient into `grads` when non-null
  /// (grads must be zeroed by the caller).
  double evaluate(const Model& model, std::span<const std::size_t> batch, Gradients* grads) const;

 private:
  struct Vote {
    std::size_t worker;
    std::size_t label;
  };

  ModelKind kind_;
  Level level_;
  TrainConfig config_;
  std::size_t num_labels_ = 0;
  std::size_t input_dim_ = 0;
  std::string encoder_fingerprint_;
  LabelPriors priors_;
  std::vector<std::string> workers_;
  Matrix worker_label_freq_;
  std::vector<SparseVector> inputs_;
  std::vector<std::size_t> single_targets_;              // ST
  std::vector<std::vector<std::size_t>> set_targets_;    // MULTI
  std::vector<std::vector<double>> dist_targets_;        // DIST
  std::vector<std::vector<Vote>> votes_;                 // MT, AE
};

/// Trains one model. Deterministic given (corpus, encoder, config, seed).
/// Level-3 training is not supported.
Model train(ModelKind kind, const Corpus& train, const Encoder& encoder, Level level, const TrainConfig& config,
            std::uint64_t seed);

// ---- prediction -----------------------------------------------------------------

/// ST and DIST: softmax of the logits. MULTI: per-label sigmoids renormalized.
LabelDistribution predict_distribution(const Model& model, const Item& item, const Encoder& encoder);

/// Argmax of the kind's distribution under the tie policy (model priors unless given).
std::size_t predict_top1(const Model& model, const Item& item, const Encoder& encoder,
                         const LabelPriors* priors = nullptr);

/// MT: softmax of the worker's head. AE: softmax of the worker-specific logits.
LabelDistribution predict_for_annotator(const Model& model, const Item& item, std::string_view worker_id,
                                        const Encoder& encoder);

/// Modal per-worker argmax under the tie policy.
std::size_t aggregate_majority(std::span<const LabelDistribution> per_worker, const LabelPriors& priors);

/// Coordinate-wise mean of per-worker distributions.
LabelDistribution aggregate_mean(std::span<const LabelDistribution> per_worker);

}  // namespace disagree
