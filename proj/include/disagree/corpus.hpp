#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "disagree/distribution.hpp"
#include "disagree/taxonomy.hpp"

namespace disagree {

enum class Split { train, dev, test };

Split split_from_string(std::string_view name);
std::string_view to_string(Split split);

/// One worker's label for one item. `level`/`ordinal` locate the label at the
/// finest level it is defined at.
struct AnnotationRecord {
  std::string item_id;
  std::string worker_id;
  std::string label;
  Level level = Level::two;
  std::size_t ordinal = 0;
};

struct Item {
  std::string item_id;
  std::string arg1;
  std::string arg2;
  std::optional<std::string> context_before;
  std::optional<std::string> context_after;
  std::optional<std::string> genre;
  Split split = Split::train;
  std::vector<AnnotationRecord> annotations;
};

/// Item text fields as read from an item file.
struct ItemText {
  std::string item_id;
  std::string arg1;
  std::string arg2;
  std::optional<std::string> context_before;
  std::optional<std::string> context_after;
  std::optional<std::string> genre;
};

/// Items grouped from unaggregated annotation records. Immutable once built.
///
/// Label frequencies (the tie-break priors) are computed over every item the
/// corpus was built with; split views share them, so gold labels do not change
/// when a split is taken.
class Corpus {
 public:
  Corpus() = default;

  const Taxonomy& taxonomy() const { return *taxonomy_; }
  std::shared_ptr<const Taxonomy> taxonomy_ptr() const { return taxonomy_; }

  const std::vector<Item>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  const Item& item(std::size_t index) const { return items_.at(index); }
  const Item* find(std::string_view item_id) const;
  std::size_t record_count() const;

  /// Sorted distinct worker ids.
  std::vector<std::string> workers() const;

  /// Finest level every record supports; aggregations above it are errors.
  Level native_level() const { return native_level_; }

  const LabelPriors& priors(Level level) const;

  Corpus subset(Split split) const;
  /// Items whose id is in `item_ids`, in corpus order.
  Corpus select(const std::vector<std::string>& item_ids) const;

  friend class CorpusBuilder;

 private:
  std::shared_ptr<const Taxonomy> taxonomy_;
  std::vector<Item> items_;
  std::unordered_map<std::string, std::size_t> index_;
  Level native_level_ = Level::three;
  std::shared_ptr<const std::array<LabelPriors, 3>> priors_;

  void reindex();
};

/// Accumulates records and item text, validating as it goes.
class CorpusBuilder {
 public:
  explicit CorpusBuilder(std::shared_ptr<const Taxonomy> taxonomy);

  /// Throws ValidationError on unknown labels, duplicate (item, worker) pairs
  /// or an item appearing in two splits. `where` prefixes error messages.
  void add_record(std::string item_id, std::string worker_id, std::string_view label, Split split,
                  std::string_view where = {});
  void add_text(ItemText text);

  /// Items without text get empty argument strings unless `require_text`.
  Corpus build(bool require_text = false) &&;

 private:
  std::shared_ptr<const Taxonomy> taxonomy_;
  std::vector<Item> items_;
  std::unordered_map<std::string, std::size_t> index_;
  std::map<std::pair<std::string, std::string>, bool> pairs_;
  std::unordered_map<std::string, ItemText> texts_;
};

/// Reads JSON-lines annotation records {item_id, worker_id, label, split}.
/// When `only` is set, records of other splits are skipped. Errors name the line.
Corpus ingest_annotations(std::istream& records, std::shared_ptr<const Taxonomy> taxonomy,
                          std::optional<Split> only = std::nullopt, std::istream* item_texts = nullptr,
                          bool require_text = false);

/// Reads JSON-lines item text records {item_id, arg1, arg2, context_before?, context_after?, genre?}.
std::vector<ItemText> read_item_texts(std::istream& in);

/// A JSON object `provenance` is written first as a header record
/// {"format": ..., ...}; readers skip such a leading record.
void write_annotations(std::ostream& out, const Corpus& corpus, const nlohmann::json& provenance = nullptr);
void write_item_texts(std::ostream& out, const Corpus& corpus, const nlohmann::json& provenance = nullptr);

// ---- aggregation -----------------------------------------------------------

/// Label counts of one item after projection to `level`.
std::vector<double> label_counts(const Item& item, Level level, const Taxonomy& taxonomy);

std::size_t majority_label(const Item& item, Level level, const Taxonomy& taxonomy, const LabelPriors& priors);

LabelDistribution empirical_distribution(const Item& item, Level level, const Taxonomy& taxonomy);

/// Labels whose share is at least `threshold`; falls back to the majority
/// label when none qualifies. Result is sorted by ordinal.
std::vector<std::size_t> multilabel_gold(const Item& item, Level level, const Taxonomy& taxonomy,
                                         const LabelPriors& priors, double threshold = 0.2);

struct CorpusStats {
  Level level = Level::two;
  std::size_t item_count = 0;
  std::size_t annotation_count = 0;
  std::size_t worker_count = 0;
  double annotations_per_worker_mean = 0.0;
  double annotations_per_item_mean = 0.0;
  double distinct_labels_per_item_mean = 0.0;
  double agreement_rate = 0.0;
  double mean_entropy_raw = 0.0;
  double mean_entropy_normalized = 0.0;

  /// Flat key-value form.
  nlohmann::json to_json() const;
};

CorpusStats corpus_stats(const Corpus& corpus, Level level);

struct WorkerSplit {
  std::vector<std::string> low;   // train item count <= median
  std::vector<std::string> high;
  double median = 0.0;
};

/// Splits workers by their number of train-split items.
WorkerSplit split_workers_by_median(const Corpus& corpus);

/// Per-worker item counts over the given corpus, keyed by worker id.
std::map<std::string, std::size_t> worker_item_counts(const Corpus& corpus);

}  // namespace disagree
