#include "disagree/distribution.hpp"

#include <cmath>
#include <string>

#include "disagree/error.hpp"

namespace disagree {

void LabelDistribution::validate(std::size_t expected_size, double tol) const {
  if (probs.size() != expected_size) {
    throw ValidationError("distribution has " + std::to_string(probs.size()) + " entries, expected " +
                          std::to_string(expected_size));
  }
  double total = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0) throw ValidationError("distribution entries must be finite and non-negative");
    total += p;
  }
  if (std::abs(total - 1.0) > tol) {
    throw ValidationError("distribution sums to " + std::to_string(total) + ", expected 1");
  }
}

LabelDistribution LabelDistribution::from_counts(Level level, std::span<const double> counts) {
  LabelDistribution dist{level, std::vector<double>(counts.begin(), counts.end())};
  double total = 0.0;
  for (double c : counts) total += c;
  if (total <= 0.0) throw ValidationError("cannot normalize an all-zero count vector");
  for (auto& p : dist.probs) p /= total;
  return dist;
}

LabelDistribution LabelDistribution::one_hot(Level level, std::size_t size, std::size_t ordinal) {
  LabelDistribution dist{level, std::vector<double>(size, 0.0)};
  dist.probs.at(ordinal) = 1.0;
  return dist;
}

LabelDistribution LabelDistribution::uniform(Level level, std::size_t size) {
  return LabelDistribution{level, std::vector<double>(size, 1.0 / static_cast<double>(size))};
}

std::size_t argmax_with_tie_policy(std::span<const double> scores, const LabelPriors& priors) {
  if (scores.empty()) throw ValidationError("argmax of an empty score vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) {
      best = i;
    } else if (scores[i] == scores[best]) {
      const double pi = i < priors.counts.size() ? priors.counts[i] : 0.0;
      const double pb = best < priors.counts.size() ? priors.counts[best] : 0.0;
      if (pi > pb) best = i;  // lower ordinal wins on equal priors
    }
  }
  return best;
}

double entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

}  // namespace disagree
