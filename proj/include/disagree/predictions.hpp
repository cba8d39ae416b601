#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "disagree/corpus.hpp"
#include "disagree/encoders.hpp"
#include "disagree/models.hpp"

namespace disagree {

struct ItemPrediction {
  std::string item_id;
  std::optional<std::size_t> label;
  std::optional<LabelDistribution> distribution;
  std::map<std::string, LabelDistribution> per_worker;
};

/// Output of one prediction adapter over a set of items. The adapter tag
/// determines which fields are populated:
///   *.top1, *.maj      -> label
///   *.logit, label-dist -> distribution
///   MT, AE             -> per_worker
class PredictionSet {
 public:
  std::string adapter;
  Level level = Level::two;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<ItemPrediction> items;

  const ItemPrediction* find(std::string_view item_id) const;
  void reindex();

  /// Checks that populated fields match the adapter tag and that every
  /// distribution is valid for `num_labels`.
  void validate(std::size_t num_labels) const;

  /// JSON lines: a header record, then one record per item or (item, worker).
  void write(std::ostream& out, const Taxonomy& taxonomy) const;
  static PredictionSet read(std::istream& in, const Taxonomy& taxonomy);

 private:
  std::unordered_map<std::string, std::size_t> index_;
};

enum class AdapterOutput { label, distribution, per_worker };

/// Fields an adapter tag fills. Throws ValidationError on unknown tags.
AdapterOutput adapter_output(std::string_view adapter);
/// Model kind an adapter tag belongs to.
ModelKind adapter_kind(std::string_view adapter);
/// Every adapter tag a model kind supports, in reporting order.
std::vector<std::string> adapters_for(ModelKind kind);

struct AdapterOptions {
  /// MT/AE aggregates average over every known annotator instead of the
  /// item's own annotators.
  bool aggregate_all_annotators = false;
};

/// Runs one adapter of `model` over every item of `corpus`.
PredictionSet run_adapter(const Model& model, const Corpus& corpus, const Encoder& encoder, std::string_view adapter,
                          const AdapterOptions& options = {});

/// Runs several adapters of one model, sharing forward passes.
std::vector<PredictionSet> run_adapters(const Model& model, const Corpus& corpus, const Encoder& encoder,
                                        const std::vector<std::string>& adapters, const AdapterOptions& options = {});

}  // namespace disagree
