#pragma once

#include <memory>
#include <string>
#include <tuple>
#include <vector>

#include "disagree/corpus.hpp"
#include "disagree/taxonomy.hpp"

namespace disagree::testing {

struct Vote {
  std::string item;
  std::string worker;
  std::string label;
  Split split = Split::train;
};

inline std::shared_ptr<const Taxonomy> default_taxonomy_ptr() {
  return std::make_shared<const Taxonomy>(Taxonomy::default_taxonomy());
}

inline Corpus make_corpus(const std::vector<Vote>& votes,
                          std::shared_ptr<const Taxonomy> taxonomy = default_taxonomy_ptr()) {
  CorpusBuilder builder(std::move(taxonomy));
  for (const auto& v : votes) builder.add_record(v.item, v.worker, v.label, v.split);
  return std::move(builder).build(false);
}

/// One item whose workers w1..wn vote the given labels.
inline std::vector<Vote> item_votes(const std::string& item, const std::vector<std::string>& labels,
                                    Split split = Split::train, std::size_t first_worker = 1) {
  std::vector<Vote> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out.push_back({item, "w" + std::to_string(first_worker + i), labels[i], split});
  }
  return out;
}

inline std::vector<std::string> repeat(const std::string& label, std::size_t n) {
  return std::vector<std::string>(n, label);
}

template <typename T>
std::vector<T> concat(std::vector<T> a, const std::vector<T>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace disagree::testing
