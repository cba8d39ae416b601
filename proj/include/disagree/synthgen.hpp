#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "disagree/corpus.hpp"
#include "disagree/rng.hpp"

namespace disagree {

enum class ArchetypeKind { faithful, preference, fallback, erratic };

std::string_view to_string(ArchetypeKind kind);
ArchetypeKind archetype_kind_from_string(std::string_view name);

/// Parameterized synthetic annotator behavior.
///   faithful:           samples the item's gold distribution
///   preference(l, s):   gold with label l's mass scaled by (1 + s), renormalized;
///                       a coarse class l scales every label below it
///   fallback(r):        on hard items answers norel with probability r
///   erratic(e):         answers a uniformly random label with probability e
/// With probability 1 - consistency the worker behaves faithfully.
struct AnnotatorArchetype {
  std::string id;
  ArchetypeKind kind = ArchetypeKind::faithful;
  std::string label;      // preference only
  double strength = 0.0;  // preference only
  double rate = 0.0;      // fallback and erratic
  double consistency = 1.0;

  void validate() const;
  nlohmann::json to_json() const;
  static AnnotatorArchetype from_json(const nlohmann::json& doc);
};

/// Gold distribution of an item after an archetype's transformation,
/// marginalized over the consistency coin.
/// `gold` is indexed by ordinals of `level`.
std::vector<double> archetype_distribution(std::span<const double> gold, bool hard,
                                           const AnnotatorArchetype& archetype, const Taxonomy& taxonomy,
                                           Level level);

/// Draws one label ordinal at `level`.
std::size_t sample_annotation(std::span<const double> gold, bool hard, const AnnotatorArchetype& archetype,
                              const Taxonomy& taxonomy, Level level, Rng& rng);

/// Worker population of one archetype kind.
struct ArchetypeGroup {
  ArchetypeKind kind = ArchetypeKind::faithful;
  std::size_t count = 0;
  double strength = 0.0;
  double rate = 0.0;
  double consistency = 1.0;
  /// Preference labels, assigned round-robin; empty means spread over the
  /// Level-1 classes other than norel.
  std::vector<std::string> labels;

  nlohmann::json to_json() const;
  static ArchetypeGroup from_json(const nlohmann::json& doc);
};

struct SyntheticSpec {
  std::size_t n_train = 2000;
  std::size_t n_dev = 300;
  std::size_t n_test = 600;
  std::size_t n_workers = 40;
  std::size_t annotations_per_item = 10;
  Level level = Level::two;
  /// Symmetric Dirichlet concentration per regime, plus extra mass on the
  /// item's primary label.
  double easy_alpha = 0.2;
  double easy_primary_boost = 16.0;
  double hard_alpha = 3.0;
  /// Hard items spread over this many labels (primary plus random others).
  std::size_t hard_support = 8;
  double hard_fraction = 0.3;
  std::vector<ArchetypeGroup> archetypes = default_archetypes();
  /// Worker activity weights are exp(activity_skew * z), z ~ N(0, 1).
  double activity_skew = 0.6;
  /// Zipf exponent of the primary-label frequencies.
  double label_skew = 0.8;
  // text stubs
  std::size_t keywords_per_label = 12;
  std::size_t noise_vocabulary = 400;
  std::size_t tokens_per_argument = 8;
  double signal_rate = 0.5;
  std::uint64_t seed = 0;

  static std::vector<ArchetypeGroup> default_archetypes();

  std::size_t n_items() const { return n_train + n_dev + n_test; }
  void validate() const;
  nlohmann::json to_json() const;
  static SyntheticSpec from_json(const nlohmann::json& doc);
};

struct ItemTruth {
  std::vector<double> gold;  // at spec.level
  bool hard = false;
};

struct GroundTruth {
  Level level = Level::two;
  std::map<std::string, ItemTruth> items;
  std::vector<AnnotatorArchetype> workers;

  nlohmann::json to_json() const;
};

struct SyntheticCorpus {
  Corpus corpus;
  GroundTruth truth;
};

/// Deterministic per seed; every item draws from its own stream, so an item's
/// content does not depend on generation order.
SyntheticCorpus generate_corpus(const SyntheticSpec& spec,
                                std::shared_ptr<const Taxonomy> taxonomy = nullptr);

}  // namespace disagree
