#include "disagree/encoders.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "disagree/error.hpp"
#include "disagree/rng.hpp"

namespace disagree {

Vector SparseVector::to_dense() const {
  Vector out = Vector::Zero(static_cast<Eigen::Index>(dim));
  for (const auto& [i, v] : entries) out[static_cast<Eigen::Index>(i)] = v;
  return out;
}

SparseVector SparseVector::from_dense(const Vector& dense) {
  SparseVector out;
  out.dim = static_cast<std::size_t>(dense.size());
  for (Eigen::Index i = 0; i < dense.size(); ++i) {
    if (dense[i] != 0.0) out.entries.emplace_back(static_cast<std::size_t>(i), dense[i]);
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (std::isalnum(c) || c >= 0x80) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

// ---- hashed n-grams ------------------------------------------------------------

HashedNgramEncoder::HashedNgramEncoder(std::size_t dim, std::uint64_t seed, bool include_context)
    : dim_(dim), seed_(seed), include_context_(include_context) {
  if (dim == 0 || (dim & (dim - 1)) != 0) {
    throw ValidationError("hashed encoder dimension must be a power of two (got " + std::to_string(dim) + ")");
  }
}

namespace {

void add_feature(std::map<std::size_t, double>& acc, std::string_view feature, std::size_t dim, std::uint64_t seed) {
  const std::uint64_t h = mix64(fnv1a64(feature) ^ seed);
  const std::size_t bucket = static_cast<std::size_t>(h & (dim - 1));
  const double sign = (h >> 63) != 0 ? -1.0 : 1.0;
  acc[bucket] += sign;
}

void add_ngrams(std::map<std::size_t, double>& acc, const std::vector<std::string>& tokens, std::string_view salt,
                std::size_t dim, std::uint64_t seed) {
  const std::string prefix(salt);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    add_feature(acc, prefix + "1:" + tokens[i], dim, seed);
    if (i + 1 < tokens.size()) add_feature(acc, prefix + "2:" + tokens[i] + ' ' + tokens[i + 1], dim, seed);
  }
}

}  // namespace

SparseVector HashedNgramEncoder::encode_sparse(const Item& item) const {
  if (item.arg1.empty() || item.arg2.empty()) {
    throw ValidationError("item '" + item.item_id + "' needs non-empty arg1 and arg2 to be encoded");
  }
  std::map<std::size_t, double> acc;
  const auto a1 = tokenize(item.arg1);
  const auto a2 = tokenize(item.arg2);
  add_ngrams(acc, a1, "a1|", dim_, seed_);
  add_ngrams(acc, a2, "a2|", dim_, seed_);
  if (!a1.empty() && !a2.empty()) add_feature(acc, "x|" + a1.back() + ' ' + a2.front(), dim_, seed_);
  if (include_context_) {
    if (item.context_before) add_ngrams(acc, tokenize(*item.context_before), "cb|", dim_, seed_);
    if (item.context_after) add_ngrams(acc, tokenize(*item.context_after), "ca|", dim_, seed_);
  }

  SparseVector out;
  out.dim = dim_;
  double norm2 = 0.0;
  for (const auto& [i, v] : acc) {
    if (v != 0.0) {
      out.entries.emplace_back(i, v);
      norm2 += v * v;
    }
  }
  if (norm2 > 0.0) {
    const double inv = 1.0 / std::sqrt(norm2);
    for (auto& e : out.entries) e.second *= inv;
  }
  return out;
}

std::string HashedNgramEncoder::fingerprint() const {
  std::ostringstream s;
  s << "hashed-ngram:d=" << dim_ << ":seed=" << seed_ << ":context=" << (include_context_ ? 1 : 0);
  return s.str();
}

// ---- precomputed vectors ---------------------------------------------------------

PrecomputedEncoder PrecomputedEncoder::load(std::istream& in) {
  PrecomputedEncoder enc;
  std::string line;
  std::size_t line_no = 0;
  std::uint64_t h = fnv1a64("precomputed");
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) continue;
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      throw ValidationError("vector file line " + std::to_string(line_no) + ": malformed record");
    }
    if (!doc.contains("item_id") || !doc.contains("vector") || !doc["vector"].is_array()) {
      throw ValidationError("vector file line " + std::to_string(line_no) + ": expected {item_id, vector}");
    }
    auto id = doc["item_id"].get<std::string>();
    auto vec = doc["vector"].get<std::vector<double>>();
    if (vec.empty()) throw ValidationError("vector file line " + std::to_string(line_no) + ": empty vector");
    if (enc.dim_ == 0) {
      enc.dim_ = vec.size();
    } else if (vec.size() != enc.dim_) {
      throw ValidationError("vector file line " + std::to_string(line_no) + ": ragged dimension " +
                            std::to_string(vec.size()) + " (expected " + std::to_string(enc.dim_) + ")");
    }
    for (double v : vec) {
      if (!std::isfinite(v)) throw ValidationError("vector file line " + std::to_string(line_no) + ": non-finite entry");
    }
    h = fnv1a64(line, h);
    if (!enc.table_.emplace(id, std::move(vec)).second) {
      throw ValidationError("vector file line " + std::to_string(line_no) + ": duplicate item '" + id + "'");
    }
  }
  if (enc.table_.empty()) throw ValidationError("vector file holds no vectors");
  enc.content_hash_ = h;
  return enc;
}

PrecomputedEncoder PrecomputedEncoder::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open vector file " + path);
  return load(in);
}

SparseVector PrecomputedEncoder::encode_sparse(const Item& item) const {
  auto it = table_.find(item.item_id);
  if (it == table_.end()) throw ValidationError("no precomputed vector for item '" + item.item_id + "'");
  SparseVector out;
  out.dim = dim_;
  out.entries.reserve(dim_);
  for (std::size_t i = 0; i < dim_; ++i) out.entries.emplace_back(i, it->second[i]);
  return out;
}

std::string PrecomputedEncoder::fingerprint() const {
  std::ostringstream s;
  s << "precomputed:d=" << dim_ << ":n=" << table_.size() << ":hash=" << std::hex << content_hash_;
  return s.str();
}

}  // namespace disagree
