#include "disagree/taxonomy.hpp"

#include <cctype>
#include <fstream>

#include "disagree/error.hpp"

namespace disagree {

extern const char* const kDefaultTaxonomyJson;

Level level_from_int(int value) {
  if (value < 1 || value > 3) {
    throw ValidationError("level must be 1, 2 or 3 (got " + std::to_string(value) + ")");
  }
  return static_cast<Level>(value);
}

std::string normalize_label(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  for (unsigned char c : raw) {
    if (c == ' ' || c == '_') {
      out.push_back('-');
    } else {
      out.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  return out;
}

namespace {

const nlohmann::json& level_entry(const nlohmann::json& obj, int level, const char* what) {
  const auto key = std::to_string(level);
  if (!obj.is_object() || !obj.contains(key)) {
    throw ValidationError(std::string("taxonomy: incomplete hierarchy, missing ") + what + " for level " + key);
  }
  return obj.at(key);
}

}  // namespace

Taxonomy Taxonomy::from_json(const nlohmann::json& doc) {
  Taxonomy tax;
  if (!doc.is_object() || !doc.contains("levels")) {
    throw ValidationError("taxonomy: document must be an object with \"levels\"");
  }
  if (!doc.contains("norel") || !doc.at("norel").is_string()) {
    throw ValidationError("taxonomy: missing \"norel\" label");
  }
  tax.norel_ = normalize_label(doc.at("norel").get<std::string>());

  for (int lv = 1; lv <= 3; ++lv) {
    const auto& arr = level_entry(doc.at("levels"), lv, "label list");
    if (!arr.is_array() || arr.empty()) {
      throw ValidationError("taxonomy: incomplete hierarchy, level " + std::to_string(lv) + " has no labels");
    }
    auto& names = tax.labels_[lv - 1];
    auto& ords = tax.ordinals_[lv - 1];
    for (const auto& entry : arr) {
      if (!entry.is_string()) throw ValidationError("taxonomy: labels must be strings");
      auto name = normalize_label(entry.get<std::string>());
      if (name.empty()) throw ValidationError("taxonomy: empty label name at level " + std::to_string(lv));
      if (!ords.emplace(name, names.size()).second) {
        throw ValidationError("taxonomy: duplicate label '" + name + "' at level " + std::to_string(lv));
      }
      names.push_back(std::move(name));
    }
    if (!ords.contains(tax.norel_)) {
      throw ValidationError("taxonomy: norel label '" + tax.norel_ + "' missing at level " + std::to_string(lv));
    }
  }

  if (!doc.contains("parents")) throw ValidationError("taxonomy: incomplete hierarchy, missing \"parents\"");
  for (int lv = 2; lv <= 3; ++lv) {
    const auto& edges = level_entry(doc.at("parents"), lv, "parent edges");
    if (!edges.is_object()) throw ValidationError("taxonomy: parent edges must be an object");
    std::unordered_map<std::string, std::string> normalized;
    for (const auto& [child, parent] : edges.items()) {
      if (!parent.is_string()) throw ValidationError("taxonomy: parent of '" + child + "' must be a string");
      normalized.emplace(normalize_label(child), normalize_label(parent.get<std::string>()));
    }
    const auto& children = tax.labels_[lv - 1];
    const auto& parent_ords = tax.ordinals_[lv - 2];
    auto& parents = tax.parents_[lv - 1];
    parents.reserve(children.size());
    for (const auto& child : children) {
      auto it = normalized.find(child);
      if (it == normalized.end()) {
        throw ValidationError("taxonomy: orphan label '" + child + "' at level " + std::to_string(lv));
      }
      auto p = parent_ords.find(it->second);
      if (p == parent_ords.end()) {
        throw ValidationError("taxonomy: label '" + child + "' has unknown parent '" + it->second + "'");
      }
      parents.push_back(p->second);
    }
    for (const auto& [child, parent] : normalized) {
      if (!tax.ordinals_[lv - 1].contains(child)) {
        throw ValidationError("taxonomy: parent edge for unknown label '" + child + "' at level " +
                              std::to_string(lv));
      }
    }
  }

  // A name shared across levels must denote the same, unrefined class.
  for (int lv = 1; lv <= 3; ++lv) {
    for (const auto& name : tax.labels_[lv - 1]) {
      for (int other = lv + 1; other <= 3; ++other) {
        auto it = tax.ordinals_[other - 1].find(name);
        if (it == tax.ordinals_[other - 1].end()) continue;
        const auto& parent_name = tax.labels_[other - 2][tax.parents_[other - 1][it->second]];
        if (parent_name != name) {
          throw ValidationError("taxonomy: label '" + name + "' appears at levels " + std::to_string(lv) + " and " +
                                std::to_string(other) + " without being its own parent");
        }
      }
    }
  }
  if (tax.project(Level::three, tax.norel_ordinal(Level::three), Level::one) != tax.norel_ordinal(Level::one) ||
      tax.parent(Level::two, tax.norel_ordinal(Level::two)) != tax.norel_ordinal(Level::one)) {
    throw ValidationError("taxonomy: norel must map to itself across levels");
  }
  return tax;
}

Taxonomy Taxonomy::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("taxonomy: cannot open " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("taxonomy: " + path.string() + ": " + e.what());
  }
  return from_json(doc);
}

const nlohmann::json& Taxonomy::default_document() {
  static const nlohmann::json doc = nlohmann::json::parse(kDefaultTaxonomyJson);
  return doc;
}

const Taxonomy& Taxonomy::default_taxonomy() {
  static const Taxonomy tax = from_json(default_document());
  return tax;
}

nlohmann::json Taxonomy::to_json() const {
  nlohmann::json doc;
  doc["norel"] = norel_;
  for (int lv = 1; lv <= 3; ++lv) doc["levels"][std::to_string(lv)] = labels_[lv - 1];
  for (int lv = 2; lv <= 3; ++lv) {
    auto& edges = doc["parents"][std::to_string(lv)];
    edges = nlohmann::json::object();
    for (std::size_t k = 0; k < labels_[lv - 1].size(); ++k) {
      edges[labels_[lv - 1][k]] = labels_[lv - 2][parents_[lv - 1][k]];
    }
  }
  return doc;
}

const std::string& Taxonomy::label(Level level, std::size_t ordinal) const {
  const auto& names = labels_[index(level)];
  if (ordinal >= names.size()) {
    throw ValidationError("ordinal " + std::to_string(ordinal) + " out of range for level " +
                          std::to_string(to_int(level)));
  }
  return names[ordinal];
}

std::optional<std::size_t> Taxonomy::find(std::string_view label, Level level) const {
  const auto& ords = ordinals_[index(level)];
  auto it = ords.find(std::string(label));
  if (it == ords.end()) {
    it = ords.find(normalize_label(label));
    if (it == ords.end()) return std::nullopt;
  }
  return it->second;
}

std::size_t Taxonomy::ordinal(std::string_view label, Level level) const {
  if (auto ord = find(label, level)) return *ord;
  throw ValidationError("unknown label '" + std::string(label) + "' at level " + std::to_string(to_int(level)));
}

bool Taxonomy::contains(std::string_view label) const {
  return find(label, Level::one) || find(label, Level::two) || find(label, Level::three);
}

Level Taxonomy::finest_level(std::string_view label) const {
  for (int lv = 3; lv >= 1; --lv) {
    if (find(label, static_cast<Level>(lv))) return static_cast<Level>(lv);
  }
  throw ValidationError("unknown label '" + std::string(label) + "'");
}

std::string Taxonomy::map_label(std::string_view label, Level target) const {
  if (auto ord = find(label, target)) return labels_[index(target)][*ord];
  const Level from = finest_level(label);
  if (to_int(from) < to_int(target)) {
    throw ValidationError("cannot refine label '" + std::string(label) + "' from level " +
                          std::to_string(to_int(from)) + " to level " + std::to_string(to_int(target)));
  }
  return labels_[index(target)][project(from, *find(label, from), target)];
}

std::size_t Taxonomy::project(Level from, std::size_t ordinal, Level to) const {
  if (to_int(to) > to_int(from)) {
    throw ValidationError("cannot project from level " + std::to_string(to_int(from)) + " to finer level " +
                          std::to_string(to_int(to)));
  }
  for (int lv = to_int(from); lv > to_int(to); --lv) ordinal = parents_[lv - 1][ordinal];
  return ordinal;
}

}  // namespace disagree
