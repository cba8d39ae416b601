#include "disagree/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <utility>

#include "disagree/error.hpp"

namespace disagree {

Split split_from_string(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "dev") return Split::dev;
  if (name == "test") return Split::test;
  throw ValidationError("unknown split '" + std::string(name) + "' (expected train, dev or test)");
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "train";
}

// ---- Corpus -----------------------------------------------------------------

const Item* Corpus::find(std::string_view item_id) const {
  auto it = index_.find(std::string(item_id));
  return it == index_.end() ? nullptr : &items_[it->second];
}

std::size_t Corpus::record_count() const {
  std::size_t n = 0;
  for (const auto& item : items_) n += item.annotations.size();
  return n;
}

std::vector<std::string> Corpus::workers() const {
  std::set<std::string> ids;
  for (const auto& item : items_) {
    for (const auto& rec : item.annotations) ids.insert(rec.worker_id);
  }
  return {ids.begin(), ids.end()};
}

const LabelPriors& Corpus::priors(Level level) const {
  if (!priors_) throw ValidationError("corpus has no label priors (empty corpus)");
  if (to_int(level) > to_int(native_level_)) {
    throw ValidationError("corpus labels are not available at level " + std::to_string(to_int(level)));
  }
  return (*priors_)[static_cast<std::size_t>(to_int(level) - 1)];
}

Corpus Corpus::subset(Split split) const {
  Corpus out;
  out.taxonomy_ = taxonomy_;
  out.native_level_ = native_level_;
  out.priors_ = priors_;
  for (const auto& item : items_) {
    if (item.split == split) out.items_.push_back(item);
  }
  out.reindex();
  return out;
}

Corpus Corpus::select(const std::vector<std::string>& item_ids) const {
  std::set<std::string> wanted(item_ids.begin(), item_ids.end());
  Corpus out;
  out.taxonomy_ = taxonomy_;
  out.native_level_ = native_level_;
  out.priors_ = priors_;
  for (const auto& item : items_) {
    if (wanted.contains(item.item_id)) out.items_.push_back(item);
  }
  out.reindex();
  return out;
}

void Corpus::reindex() {
  index_.clear();
  for (std::size_t i = 0; i < items_.size(); ++i) index_.emplace(items_[i].item_id, i);
}

// ---- CorpusBuilder ------------------------------------------------------------

CorpusBuilder::CorpusBuilder(std::shared_ptr<const Taxonomy> taxonomy) : taxonomy_(std::move(taxonomy)) {
  if (!taxonomy_) throw ValidationError("corpus builder requires a taxonomy");
}

void CorpusBuilder::add_record(std::string item_id, std::string worker_id, std::string_view label, Split split,
                               std::string_view where) {
  const std::string prefix = where.empty() ? std::string() : std::string(where) + ": ";
  if (item_id.empty()) throw ValidationError(prefix + "empty item_id");
  if (!taxonomy_->contains(label)) {
    throw ValidationError(prefix + "unknown label '" + std::string(label) + "'");
  }
  const Level level = taxonomy_->finest_level(label);
  if (level == Level::one && taxonomy_->find(label, Level::two) == std::nullopt) {
    throw ValidationError(prefix + "label '" + std::string(label) + "' is a Level-1 class; records need Level-2 or Level-3 labels");
  }
  if (!worker_id.empty() && !pairs_.emplace(std::make_pair(item_id, worker_id), true).second) {
    throw ValidationError(prefix + "duplicate annotation for item '" + item_id + "' by worker '" + worker_id + "'");
  }

  auto [it, inserted] = index_.emplace(item_id, items_.size());
  if (inserted) {
    Item item;
    item.item_id = item_id;
    item.split = split;
    items_.push_back(std::move(item));
  } else if (items_[it->second].split != split) {
    throw ValidationError(prefix + "item '" + item_id + "' appears in splits " +
                          std::string(to_string(items_[it->second].split)) + " and " + std::string(to_string(split)));
  }
  AnnotationRecord rec;
  rec.item_id = std::move(item_id);
  rec.worker_id = std::move(worker_id);
  rec.level = level;
  rec.ordinal = *taxonomy_->find(label, level);
  rec.label = taxonomy_->label(level, rec.ordinal);
  items_[it->second].annotations.push_back(std::move(rec));
}

void CorpusBuilder::add_text(ItemText text) {
  auto id = text.item_id;
  if (!texts_.emplace(id, std::move(text)).second) {
    throw ValidationError("duplicate item text for '" + id + "'");
  }
}

Corpus CorpusBuilder::build(bool require_text) && {
  Corpus corpus;
  corpus.taxonomy_ = taxonomy_;
  for (auto& item : items_) {
    auto it = texts_.find(item.item_id);
    if (it != texts_.end()) {
      item.arg1 = std::move(it->second.arg1);
      item.arg2 = std::move(it->second.arg2);
      item.context_before = std::move(it->second.context_before);
      item.context_after = std::move(it->second.context_after);
      item.genre = std::move(it->second.genre);
    } else if (require_text) {
      throw ValidationError("item '" + item.item_id + "' has annotations but no text record");
    }
  }
  corpus.items_ = std::move(items_);

  Level native = Level::three;
  for (const auto& item : corpus.items_) {
    for (const auto& rec : item.annotations) {
      if (to_int(rec.level) < to_int(native)) native = rec.level;
    }
  }
  corpus.native_level_ = native;

  if (!corpus.items_.empty()) {
    auto priors = std::make_shared<std::array<LabelPriors, 3>>();
    const auto& tax = *taxonomy_;
    for (int lv = 1; lv <= to_int(native); ++lv) {
      const Level level = static_cast<Level>(lv);
      auto& p = (*priors)[lv - 1];
      p.level = level;
      p.counts.assign(tax.size(level), 0.0);
      for (const auto& item : corpus.items_) {
        for (const auto& rec : item.annotations) p.counts[tax.project(rec.level, rec.ordinal, level)] += 1.0;
      }
    }
    corpus.priors_ = std::move(priors);
  }
  corpus.reindex();
  return corpus;
}

// ---- file formats ---------------------------------------------------------------

namespace {

nlohmann::json parse_line(const std::string& line, std::size_t line_no, const char* what) {
  try {
    auto doc = nlohmann::json::parse(line);
    if (!doc.is_object()) throw ValidationError("");
    return doc;
  } catch (const std::exception&) {
    throw ValidationError(std::string(what) + " line " + std::to_string(line_no) + ": malformed record");
  }
}

std::string required_string(const nlohmann::json& doc, const char* key, std::size_t line_no, const char* what) {
  auto it = doc.find(key);
  if (it == doc.end() || !it->is_string()) {
    throw ValidationError(std::string(what) + " line " + std::to_string(line_no) + ": missing string field '" + key +
                          "'");
  }
  return it->get<std::string>();
}

std::optional<std::string> optional_string(const nlohmann::json& doc, const char* key) {
  auto it = doc.find(key);
  if (it == doc.end() || it->is_null()) return std::nullopt;
  return it->get<std::string>();
}

bool blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

// A leading provenance record {"format": ..., ...} carries no data.
bool header_record(const nlohmann::json& doc, bool first) {
  return first && doc.is_object() && doc.contains("format") && !doc.contains("item_id");
}

void write_header(std::ostream& out, const char* format, const nlohmann::json& provenance) {
  if (!provenance.is_object()) return;
  nlohmann::json doc = provenance;
  doc["format"] = format;
  out << doc.dump() << '\n';
}

}  // namespace

std::vector<ItemText> read_item_texts(std::istream& in) {
  std::vector<ItemText> out;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    auto doc = parse_line(line, line_no, "item file");
    if (header_record(doc, std::exchange(first, false))) continue;
    ItemText text;
    text.item_id = required_string(doc, "item_id", line_no, "item file");
    text.arg1 = required_string(doc, "arg1", line_no, "item file");
    text.arg2 = required_string(doc, "arg2", line_no, "item file");
    text.context_before = optional_string(doc, "context_before");
    text.context_after = optional_string(doc, "context_after");
    text.genre = optional_string(doc, "genre");
    out.push_back(std::move(text));
  }
  return out;
}

Corpus ingest_annotations(std::istream& records, std::shared_ptr<const Taxonomy> taxonomy, std::optional<Split> only,
                          std::istream* item_texts, bool require_text) {
  CorpusBuilder builder(std::move(taxonomy));
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(records, line)) {
    ++line_no;
    if (blank(line)) continue;
    auto doc = parse_line(line, line_no, "annotation file");
    if (header_record(doc, std::exchange(first, false))) continue;
    auto item_id = required_string(doc, "item_id", line_no, "annotation file");
    auto worker_id = required_string(doc, "worker_id", line_no, "annotation file");
    auto label = required_string(doc, "label", line_no, "annotation file");
    auto split_name = doc.contains("split") ? required_string(doc, "split", line_no, "annotation file") : "train";
    const std::string where = "annotation file line " + std::to_string(line_no);
    Split split;
    try {
      split = split_from_string(split_name);
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
    if (only && split != *only) continue;
    builder.add_record(std::move(item_id), std::move(worker_id), label, split, where);
  }
  if (item_texts) {
    for (auto& text : read_item_texts(*item_texts)) builder.add_text(std::move(text));
  }
  return std::move(builder).build(require_text);
}

void write_annotations(std::ostream& out, const Corpus& corpus, const nlohmann::json& provenance) {
  write_header(out, "disagree-annotations", provenance);
  for (const auto& item : corpus.items()) {
    for (const auto& rec : item.annotations) {
      nlohmann::json doc;
      doc["item_id"] = rec.item_id;
      doc["worker_id"] = rec.worker_id;
      doc["label"] = rec.label;
      doc["split"] = to_string(item.split);
      out << doc.dump() << '\n';
    }
  }
}

void write_item_texts(std::ostream& out, const Corpus& corpus, const nlohmann::json& provenance) {
  write_header(out, "disagree-items", provenance);
  for (const auto& item : corpus.items()) {
    nlohmann::json doc;
    doc["item_id"] = item.item_id;
    doc["arg1"] = item.arg1;
    doc["arg2"] = item.arg2;
    if (item.context_before) doc["context_before"] = *item.context_before;
    if (item.context_after) doc["context_after"] = *item.context_after;
    if (item.genre) doc["genre"] = *item.genre;
    out << doc.dump() << '\n';
  }
}

// ---- aggregation ---------------------------------------------------------------

std::vector<double> label_counts(const Item& item, Level level, const Taxonomy& taxonomy) {
  std::vector<double> counts(taxonomy.size(level), 0.0);
  for (const auto& rec : item.annotations) {
    if (to_int(rec.level) < to_int(level)) {
      throw ValidationError("label '" + rec.label + "' of item '" + item.item_id + "' cannot be refined to level " +
                            std::to_string(to_int(level)));
    }
    counts[taxonomy.project(rec.level, rec.ordinal, level)] += 1.0;
  }
  return counts;
}

std::size_t majority_label(const Item& item, Level level, const Taxonomy& taxonomy, const LabelPriors& priors) {
  if (item.annotations.empty()) throw ValidationError("item '" + item.item_id + "' has no annotations");
  const auto counts = label_counts(item, level, taxonomy);
  return argmax_with_tie_policy(counts, priors);
}

LabelDistribution empirical_distribution(const Item& item, Level level, const Taxonomy& taxonomy) {
  if (item.annotations.empty()) throw ValidationError("item '" + item.item_id + "' has no annotations");
  const auto counts = label_counts(item, level, taxonomy);
  return LabelDistribution::from_counts(level, counts);
}

std::vector<std::size_t> multilabel_gold(const Item& item, Level level, const Taxonomy& taxonomy,
                                         const LabelPriors& priors, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw ValidationError("multi-label threshold must lie in (0, 1]");
  }
  if (item.annotations.empty()) throw ValidationError("item '" + item.item_id + "' has no annotations");
  const auto counts = label_counts(item, level, taxonomy);
  const double total = static_cast<double>(item.annotations.size());
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    // compare counts rather than shares so 2/10 vs 0.2 is not at the mercy of rounding
    if (counts[k] > 0.0 && counts[k] >= threshold * total - 1e-9) out.push_back(k);
  }
  if (out.empty()) out.push_back(argmax_with_tie_policy(counts, priors));
  return out;
}

nlohmann::json CorpusStats::to_json() const {
  return nlohmann::json{{"level", to_int(level)},
                        {"item_count", item_count},
                        {"annotation_count", annotation_count},
                        {"worker_count", worker_count},
                        {"annotations_per_worker_mean", annotations_per_worker_mean},
                        {"annotations_per_item_mean", annotations_per_item_mean},
                        {"distinct_labels_per_item_mean", distinct_labels_per_item_mean},
                        {"agreement_rate", agreement_rate},
                        {"mean_entropy_raw", mean_entropy_raw},
                        {"mean_entropy_normalized", mean_entropy_normalized}};
}

CorpusStats corpus_stats(const Corpus& corpus, Level level) {
  if (corpus.empty()) throw ValidationError("corpus_stats on an empty corpus");
  if (to_int(level) > to_int(corpus.native_level())) {
    throw ValidationError("corpus labels are not available at level " + std::to_string(to_int(level)));
  }
  const auto& tax = corpus.taxonomy();
  CorpusStats stats;
  stats.level = level;
  stats.item_count = corpus.size();
  std::set<std::string> workers;
  double agreement = 0.0, h_raw = 0.0, h_norm = 0.0, distinct = 0.0;
  for (const auto& item : corpus.items()) {
    for (const auto& rec : item.annotations) workers.insert(rec.worker_id);
    stats.annotation_count += item.annotations.size();
    const auto counts = label_counts(item, level, tax);
    const double n = static_cast<double>(item.annotations.size());
    const double modal = *std::max_element(counts.begin(), counts.end());
    agreement += modal / n;
    std::size_t observed = 0;
    for (double c : counts) observed += c > 0.0 ? 1 : 0;
    distinct += static_cast<double>(observed);
    const auto dist = LabelDistribution::from_counts(level, counts);
    const double h = entropy(dist.probs);
    h_raw += h;
    if (observed > 1) h_norm += h / std::log(static_cast<double>(observed));
  }
  const double items = static_cast<double>(corpus.size());
  stats.worker_count = workers.size();
  stats.annotations_per_item_mean = static_cast<double>(stats.annotation_count) / items;
  stats.annotations_per_worker_mean =
      workers.empty() ? 0.0 : static_cast<double>(stats.annotation_count) / static_cast<double>(workers.size());
  stats.distinct_labels_per_item_mean = distinct / items;
  stats.agreement_rate = agreement / items;
  stats.mean_entropy_raw = h_raw / items;
  stats.mean_entropy_normalized = h_norm / items;
  return stats;
}

std::map<std::string, std::size_t> worker_item_counts(const Corpus& corpus) {
  std::map<std::string, std::size_t> counts;
  for (const auto& item : corpus.items()) {
    for (const auto& rec : item.annotations) ++counts[rec.worker_id];
  }
  return counts;
}

WorkerSplit split_workers_by_median(const Corpus& corpus) {
  const auto counts = worker_item_counts(corpus.subset(Split::train));
  if (counts.size() < 2) throw ValidationError("median split needs at least two workers in the train split");
  std::vector<double> values;
  values.reserve(counts.size());
  for (const auto& [id, n] : counts) values.push_back(static_cast<double>(n));
  std::sort(values.begin(), values.end());
  const std::size_t m = values.size();
  WorkerSplit out;
  out.median = m % 2 == 1 ? values[m / 2] : 0.5 * (values[m / 2 - 1] + values[m / 2]);
  for (const auto& [id, n] : counts) {
    (static_cast<double>(n) <= out.median ? out.low : out.high).push_back(id);
  }
  return out;
}

}  // namespace disagree
