#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace disagree {

/// Granularity of the sense hierarchy. Level 1 is the coarsest.
enum class Level : int { one = 1, two = 2, three = 3 };

Level level_from_int(int value);
inline int to_int(Level level) { return static_cast<int>(level); }

/// Lowercases ASCII and folds spaces/underscores to hyphens.
std::string normalize_label(std::string_view raw);

/// Three-level discourse-relation label hierarchy.
///
/// A label name is unique within a level. The same name may appear at two
/// adjacent levels only when the finer entry is parented to the coarser entry
/// of the same name (e.g. "contrast" at Level-2 and Level-3); such a name
/// denotes one class that is simply not refined further. The no-relation label
/// is present at every level and always maps to itself.
///
/// Immutable after construction.
class Taxonomy {
 public:
  /// Parses the JSON document form:
  ///   {"norel": "norel",
  ///    "levels":  {"1": [...], "2": [...], "3": [...]},
  ///    "parents": {"2": {"child": "parent", ...}, "3": {...}}}
  /// Label ordinals follow array order.
  static Taxonomy from_json(const nlohmann::json& doc);
  static Taxonomy load_file(const std::filesystem::path& path);

  /// The shipped PDTB-3-style 5/17/29 hierarchy.
  static const Taxonomy& default_taxonomy();
  static const nlohmann::json& default_document();

  nlohmann::json to_json() const;

  std::size_t size(Level level) const { return labels_[index(level)].size(); }
  const std::vector<std::string>& labels(Level level) const { return labels_[index(level)]; }
  const std::string& label(Level level, std::size_t ordinal) const;

  std::optional<std::size_t> find(std::string_view label, Level level) const;
  /// Throws ValidationError when `label` is not defined at `level`.
  std::size_t ordinal(std::string_view label, Level level) const;

  bool contains(std::string_view label) const;
  /// Finest level at which `label` is defined.
  Level finest_level(std::string_view label) const;

  /// Unique ancestor of `label` at `target`; identity if the label is already
  /// defined there. Refining to a finer level is an error.
  std::string map_label(std::string_view label, Level target) const;

  /// Ordinal projection from a finer (or equal) level to a coarser one.
  std::size_t project(Level from, std::size_t ordinal, Level to) const;

  /// Parent ordinal one level up; `level` must be 2 or 3.
  std::size_t parent(Level level, std::size_t ordinal) const { return parents_[index(level)][ordinal]; }

  const std::string& norel() const { return norel_; }
  std::size_t norel_ordinal(Level level) const { return ordinal(norel_, level); }

 private:
  static std::size_t index(Level level) { return static_cast<std::size_t>(to_int(level) - 1); }

  std::string norel_;
  std::array<std::vector<std::string>, 3> labels_;
  // parents_[i][k] = ordinal at level i of the parent of ordinal k at level i+1
  // (stored at index of the child level; parents_[0] is empty).
  std::array<std::vector<std::size_t>, 3> parents_;
  std::array<std::unordered_map<std::string, std::size_t>, 3> ordinals_;
};

}  // namespace disagree
