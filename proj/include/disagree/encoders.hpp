#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "disagree/corpus.hpp"
#include "disagree/tensor.hpp"

namespace disagree {

/// Index-sorted (coordinate, value) pairs.
struct SparseVector {
  std::size_t dim = 0;
  std::vector<std::pair<std::size_t, double>> entries;

  Vector to_dense() const;
  static SparseVector from_dense(const Vector& dense);
};

struct EncodedItem {
  std::string item_id;
  Vector vector;
};

/// Maps an item's argument pair to a fixed-length real vector.
/// Implementations are pure and safe to call concurrently.
class Encoder {
 public:
  virtual ~Encoder() = default;
  virtual std::size_t dim() const = 0;
  virtual SparseVector encode_sparse(const Item& item) const = 0;
  /// Identifies the encoder configuration; stored in model manifests.
  virtual std::string fingerprint() const = 0;

  EncodedItem encode(const Item& item) const { return {item.item_id, encode_sparse(item).to_dense()}; }
};

/// Signed feature hashing of lowercased word unigrams and bigrams.
///
/// Arg1 and Arg2 tokens carry distinct position salts, and the boundary bigram
/// (last word of Arg1, first word of Arg2) is hashed as its own feature.
/// Output is L2-normalized.
class HashedNgramEncoder final : public Encoder {
 public:
  /// `dim` must be a power of two.
  explicit HashedNgramEncoder(std::size_t dim = 4096, std::uint64_t seed = 0, bool include_context = false);

  std::size_t dim() const override { return dim_; }
  SparseVector encode_sparse(const Item& item) const override;
  std::string fingerprint() const override;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
  bool include_context_;
};

/// Lookup table of externally computed vectors, one JSON line per item:
/// {"item_id": "...", "vector": [floats]}.
class PrecomputedEncoder final : public Encoder {
 public:
  static PrecomputedEncoder load(std::istream& in);
  static PrecomputedEncoder load_file(const std::string& path);

  std::size_t dim() const override { return dim_; }
  SparseVector encode_sparse(const Item& item) const override;
  std::string fingerprint() const override;
  std::size_t size() const { return table_.size(); }

 private:
  std::size_t dim_ = 0;
  std::map<std::string, std::vector<double>> table_;
  std::uint64_t content_hash_ = 0;
};

/// Lowercased alphanumeric word tokens.
std::vector<std::string> tokenize(std::string_view text);

}  // namespace disagree
