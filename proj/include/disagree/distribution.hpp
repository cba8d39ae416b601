#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "disagree/taxonomy.hpp"

namespace disagree {

/// Normalized probability vector over the labels of one taxonomy level,
/// indexed by ordinal.
struct LabelDistribution {
  Level level = Level::two;
  std::vector<double> probs;

  std::size_t size() const { return probs.size(); }
  double operator[](std::size_t i) const { return probs[i]; }

  /// Throws ValidationError unless entries are finite, non-negative and sum to 1 within `tol`.
  void validate(std::size_t expected_size, double tol = 1e-9) const;

  static LabelDistribution from_counts(Level level, std::span<const double> counts);
  static LabelDistribution one_hot(Level level, std::size_t size, std::size_t ordinal);
  static LabelDistribution uniform(Level level, std::size_t size);
};

/// Corpus-wide label frequencies at one level. Drives every tie-break: a tie
/// goes to the more frequent label, then to the lower ordinal.
struct LabelPriors {
  Level level = Level::two;
  std::vector<double> counts;
};

/// Index of the maximum score under the tie policy. Scores compare exactly.
std::size_t argmax_with_tie_policy(std::span<const double> scores, const LabelPriors& priors);

/// Shannon entropy in nats, with 0 ln 0 = 0.
double entropy(std::span<const double> probs);

}  // namespace disagree
