#include "disagree/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "disagree/error.hpp"
#include "disagree/rng.hpp"

namespace disagree {

namespace {
constexpr double kProbFloor = 1e-12;

double kl2(std::span<const double> p, std::span<const double> m) {
  double out = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) out += p[i] * std::log2(p[i] / m[i]);
  }
  return out;
}

}  // namespace

nlohmann::json SoftMetricReport::to_json() const {
  return nlohmann::json{{"ce", ce}, {"jsd", jsd}, {"md", md}, {"ed", ed}, {"n_items", n_items}};
}

nlohmann::json HardMetricReport::to_json() const {
  return nlohmann::json{{"accuracy", accuracy},     {"macro_f1", macro_f1},
                        {"per_class_f1", per_class_f1}, {"support", support},
                        {"predicted_count", predicted_count}, {"n_items", n_items},
                        {"n_pairs", n_pairs}};
}

SoftMetrics soft_metrics(std::span<const double> pred, std::span<const double> gold) {
  if (pred.size() != gold.size()) {
    throw ValidationError("soft metrics on distributions of different lengths (" + std::to_string(pred.size()) +
                          " vs " + std::to_string(gold.size()) + ")");
  }
  SoftMetrics out{0.0, 0.0, 0.0, 0.0};
  std::vector<double> mid(pred.size());
  double sq = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (gold[i] > 0.0) out.ce -= gold[i] * std::log(std::max(pred[i], kProbFloor));
    mid[i] = 0.5 * (gold[i] + pred[i]);
    const double diff = gold[i] - pred[i];
    out.md += std::abs(diff);
    sq += diff * diff;
  }
  out.ed = std::sqrt(sq);
  out.jsd = std::clamp(0.5 * kl2(gold, mid) + 0.5 * kl2(pred, mid), 0.0, 1.0);
  return out;
}

HardMetricReport hard_metrics(std::span<const std::size_t> gold, std::span<const std::size_t> predicted,
                              std::size_t num_classes, const EvalOptions& options) {
  if (gold.size() != predicted.size()) throw ValidationError("gold and predicted sequences differ in length");
  HardMetricReport rep;
  rep.n_pairs = gold.size();
  rep.support.assign(num_classes, 0);
  rep.predicted_count.assign(num_classes, 0);
  std::vector<std::size_t> tp(num_classes, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] >= num_classes || predicted[i] >= num_classes) throw ValidationError("label ordinal out of range");
    ++rep.support[gold[i]];
    ++rep.predicted_count[predicted[i]];
    if (gold[i] == predicted[i]) {
      ++tp[gold[i]];
      ++correct;
    }
  }
  rep.accuracy = gold.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(gold.size());
  rep.per_class_f1.assign(num_classes, 0.0);
  double f1_sum = 0.0;
  std::size_t counted = 0;
  for (std::size_t k = 0; k < num_classes; ++k) {
    const double denom = static_cast<double>(rep.support[k] + rep.predicted_count[k]);
    if (denom > 0.0) rep.per_class_f1[k] = 2.0 * static_cast<double>(tp[k]) / denom;
    if (denom > 0.0 || options.include_absent_classes) {
      f1_sum += rep.per_class_f1[k];
      ++counted;
    }
  }
  rep.macro_f1 = counted ? f1_sum / static_cast<double>(counted) : 0.0;
  return rep;
}

namespace {

std::vector<std::size_t> all_indices(const Corpus& corpus) {
  std::vector<std::size_t> idx(corpus.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

const ItemPrediction& prediction_for(const PredictionSet& preds, const Item& item) {
  const auto* p = preds.find(item.item_id);
  if (!p) throw ValidationError("no prediction for item '" + item.item_id + "' (adapter " + preds.adapter + ")");
  return *p;
}

void check_level(const PredictionSet& preds, Level level) {
  if (preds.level != level) {
    throw ValidationError("predictions are at level " + std::to_string(to_int(preds.level)) +
                          " but evaluation requested level " + std::to_string(to_int(level)));
  }
}

}  // namespace

HardMetricReport eval_single_label(const PredictionSet& preds, const Corpus& corpus, Level level,
                                   const EvalOptions& options, std::optional<std::span<const std::size_t>> item_subset) {
  check_level(preds, level);
  const auto& tax = corpus.taxonomy();
  const auto& priors = corpus.priors(level);
  const auto every = all_indices(corpus);
  const auto subset = item_subset ? *item_subset : std::span<const std::size_t>(every);
  std::vector<std::size_t> gold, predicted;
  gold.reserve(subset.size());
  predicted.reserve(subset.size());
  for (auto i : subset) {
    const auto& item = corpus.item(i);
    const auto& p = prediction_for(preds, item);
    if (!p.label) {
      throw ValidationError("adapter " + preds.adapter + " provides no single label for item '" + item.item_id + "'");
    }
    gold.push_back(majority_label(item, level, tax, priors));
    predicted.push_back(*p.label);
  }
  auto rep = hard_metrics(gold, predicted, tax.size(level), options);
  rep.n_items = subset.size();
  return rep;
}

SoftMetricReport eval_distribution(const PredictionSet& preds, const Corpus& corpus, Level level,
                                   std::optional<std::span<const std::size_t>> item_subset) {
  check_level(preds, level);
  const auto& tax = corpus.taxonomy();
  const auto every = all_indices(corpus);
  const auto subset = item_subset ? *item_subset : std::span<const std::size_t>(every);
  SoftMetricReport rep;
  for (auto i : subset) {
    const auto& item = corpus.item(i);
    const auto& p = prediction_for(preds, item);
    if (!p.distribution) {
      throw ValidationError("adapter " + preds.adapter + " provides no distribution for item '" + item.item_id + "'");
    }
    const auto gold = empirical_distribution(item, level, tax);
    const auto m = soft_metrics(p.distribution->probs, gold.probs);
    rep.ce += m.ce;
    rep.jsd += m.jsd;
    rep.md += m.md;
    rep.ed += m.ed;
  }
  rep.n_items = subset.size();
  if (rep.n_items > 0) {
    const double n = static_cast<double>(rep.n_items);
    rep.ce /= n;
    rep.jsd /= n;
    rep.md /= n;
    rep.ed /= n;
  }
  return rep;
}

namespace {

void collect_pairs(const PredictionSet& preds, const Corpus& corpus, Level level, std::span<const std::size_t> subset,
                   const std::function<bool(const std::string&)>& worker_filter, AnnotatorPairs& out) {
  const auto& tax = corpus.taxonomy();
  const auto& priors = corpus.priors(level);
  for (auto i : subset) {
    const auto& item = corpus.item(i);
    const auto& p = prediction_for(preds, item);
    if (!p.label && p.per_worker.empty()) {
      throw ValidationError("adapter " + preds.adapter + " provides neither labels nor per-annotator predictions");
    }
    for (const auto& rec : item.annotations) {
      if (worker_filter && !worker_filter(rec.worker_id)) continue;
      std::size_t predicted;
      if (p.label) {
        predicted = *p.label;
      } else {
        auto it = p.per_worker.find(rec.worker_id);
        if (it == p.per_worker.end()) {
          throw ValidationError("no prediction for item '" + item.item_id + "', worker '" + rec.worker_id + "'");
        }
        predicted = argmax_with_tie_policy(it->second.probs, priors);
      }
      out.workers.push_back(rec.worker_id);
      out.gold.push_back(tax.project(rec.level, rec.ordinal, level));
      out.predicted.push_back(predicted);
    }
  }
}

}  // namespace

AnnotatorPairs annotator_pairs(const PredictionSet& preds, const Corpus& corpus, Level level) {
  check_level(preds, level);
  AnnotatorPairs out;
  const auto every = all_indices(corpus);
  collect_pairs(preds, corpus, level, every, {}, out);
  return out;
}

HardMetricReport eval_annotator_specific(const PredictionSet& preds, const Corpus& corpus, Level level,
                                         const EvalOptions& options,
                                         std::optional<std::span<const std::size_t>> item_subset,
                                         const std::function<bool(const std::string&)>& worker_filter) {
  check_level(preds, level);
  const auto every = all_indices(corpus);
  const auto subset = item_subset ? *item_subset : std::span<const std::size_t>(every);
  AnnotatorPairs pairs;
  collect_pairs(preds, corpus, level, subset, worker_filter, pairs);
  auto rep = hard_metrics(pairs.gold, pairs.predicted, corpus.taxonomy().size(level), options);
  rep.n_items = subset.size();
  return rep;
}

ResamplePlan make_resamples(std::size_t n_items, std::size_t count, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ValidationError("resample fraction must lie in (0, 1]");
  if (count < 2) throw ValidationError("a resampled t-test needs at least two resamples");
  ResamplePlan plan;
  plan.seed = seed;
  plan.fraction = fraction;
  const auto take = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n_items))));
  Rng rng(derive_seed(seed, "resample"));
  std::vector<std::size_t> idx(n_items);
  for (std::size_t r = 0; r < count; ++r) {
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(idx));
    std::vector<std::size_t> subset(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(std::min(take, n_items)));
    std::sort(subset.begin(), subset.end());
    plan.subsets.push_back(std::move(subset));
  }
  return plan;
}

double resampled_paired_ttest(std::span<const double> scores_a, std::span<const double> scores_b) {
  if (scores_a.size() != scores_b.size()) throw ValidationError("paired t-test needs equally many scores per system");
  const std::size_t n = scores_a.size();
  if (n < 2) throw ValidationError("paired t-test needs at least two resamples");
  std::vector<double> diff(n);
  for (std::size_t i = 0; i < n; ++i) diff[i] = scores_a[i] - scores_b[i];
  const double mean = std::accumulate(diff.begin(), diff.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double d : diff) ss += (d - mean) * (d - mean);
  const double var = ss / static_cast<double>(n - 1);
  // differences that agree to rounding error count as zero variance
  if (var <= 1e-30 * std::max(1.0, mean * mean)) return mean == 0.0 ? 1.0 : 0.0;
  const double t = mean / std::sqrt(var / static_cast<double>(n));
  const boost::math::students_t dist(static_cast<double>(n - 1));
  const double p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  return std::clamp(p, 0.0, 1.0);
}

}  // namespace disagree
