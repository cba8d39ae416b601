#include <doctest.h>

#include <cmath>
#include <set>

#include "disagree/error.hpp"
#include "disagree/evaluation.hpp"
#include "disagree/rng.hpp"
#include "helpers.hpp"

using namespace disagree;
using namespace disagree::testing;

namespace {

const Taxonomy& tax() { return Taxonomy::default_taxonomy(); }
std::size_t l1(const char* label) { return tax().ordinal(label, Level::one); }

PredictionSet label_set(const std::string& adapter, const std::vector<std::pair<std::string, std::size_t>>& labels) {
  PredictionSet set;
  set.adapter = adapter;
  set.level = Level::one;
  for (const auto& [id, l] : labels) {
    ItemPrediction p;
    p.item_id = id;
    p.label = l;
    set.items.push_back(p);
  }
  set.reindex();
  return set;
}

std::vector<double> random_dist(Rng& rng, std::size_t n) {
  std::vector<double> p(n);
  double total = 0.0;
  for (auto& x : p) {
    x = rng.bernoulli(0.2) ? 0.0 : rng.gamma(0.5);
    total += x;
  }
  if (total == 0.0) {
    p[0] = 1.0;
    return p;
  }
  for (auto& x : p) x /= total;
  return p;
}

}  // namespace

TEST_CASE("soft_metrics examples") {
  const std::vector<double> half{0.5, 0.5}, a{1.0, 0.0}, b{0.0, 1.0};
  auto m = soft_metrics(half, half);
  CHECK(m.jsd == 0.0);
  CHECK(m.md == 0.0);
  CHECK(m.ed == 0.0);
  CHECK(m.ce == doctest::Approx(std::log(2.0)));

  m = soft_metrics(a, b);
  CHECK(m.jsd == doctest::Approx(1.0));
  CHECK(m.md == doctest::Approx(2.0));
  CHECK(m.ed == doctest::Approx(std::sqrt(2.0)));

  m = soft_metrics(a, half);
  CHECK(m.jsd == doctest::Approx(0.3113).epsilon(1e-3));
  CHECK(std::abs(m.jsd - 0.3113) < 1e-4);

  const std::vector<double> three{0.2, 0.3, 0.5};
  CHECK_THROWS_AS(soft_metrics(half, three), ValidationError);
}

TEST_CASE("soft metric properties on random triples") {
  Rng rng(17);
  for (int t = 0; t < 1000; ++t) {
    const auto p = random_dist(rng, 5), q = random_dist(rng, 5), r = random_dist(rng, 5);
    const auto pq = soft_metrics(p, q), qp = soft_metrics(q, p), pr = soft_metrics(p, r), rq = soft_metrics(r, q);
    CHECK(pq.jsd == qp.jsd);
    CHECK(pq.jsd >= 0.0);
    CHECK(pq.jsd <= 1.0);
    CHECK(pq.md <= pr.md + rq.md + 1e-9);
    CHECK(pq.ed <= pr.ed + rq.ed + 1e-9);
    CHECK(soft_metrics(q, p).ce >= entropy(p) - 1e-9);
  }
}

TEST_CASE("eval_single_label examples") {
  const auto corpus = make_corpus(concat(item_votes("a", {"cause"}), item_votes("b", {"conjunction"})));
  const auto perfect = label_set("ST.top1", {{"a", l1("contingency")}, {"b", l1("expansion")}});
  auto r = eval_single_label(perfect, corpus, Level::one);
  CHECK(r.accuracy == 1.0);
  CHECK(r.macro_f1 == 1.0);

  const auto constant = label_set("ST.top1", {{"a", l1("contingency")}, {"b", l1("contingency")}});
  r = eval_single_label(constant, corpus, Level::one);
  CHECK(r.accuracy == doctest::Approx(0.5));
  CHECK(r.macro_f1 == doctest::Approx(1.0 / 3.0));

  const auto miss = label_set("ST.top1", {{"a", l1("temporal")}, {"b", l1("temporal")}});
  r = eval_single_label(miss, corpus, Level::one);
  CHECK(r.macro_f1 == 0.0);
  CHECK(r.accuracy == 0.0);
}

TEST_CASE("macro-F1 can include absent classes") {
  const auto corpus = make_corpus(concat(item_votes("a", {"cause"}), item_votes("b", {"conjunction"})));
  const auto perfect = label_set("ST.top1", {{"a", l1("contingency")}, {"b", l1("expansion")}});
  EvalOptions opts;
  opts.include_absent_classes = true;
  CHECK(eval_single_label(perfect, corpus, Level::one, opts).macro_f1 == doctest::Approx(2.0 / 5.0));
}

TEST_CASE("missing prediction names the item") {
  const auto corpus = make_corpus(concat(item_votes("a", {"cause"}), item_votes("b", {"conjunction"})));
  const auto partial = label_set("ST.top1", {{"a", l1("contingency")}});
  CHECK_THROWS_WITH_AS(eval_single_label(partial, corpus, Level::one), doctest::Contains("'b'"), ValidationError);
  CHECK_THROWS_WITH_AS(eval_annotator_specific(partial, corpus, Level::one), doctest::Contains("'b'"),
                       ValidationError);
}

TEST_CASE("eval_distribution examples") {
  const auto corpus = make_corpus(concat(item_votes("a", {"cause", "cause"}), item_votes("b", {"conjunction"})));
  PredictionSet gold;
  gold.adapter = "label-dist";
  gold.level = Level::one;
  PredictionSet uniform = gold;
  for (const auto& item : corpus.items()) {
    gold.items.push_back({item.item_id, std::nullopt, empirical_distribution(item, Level::one, tax()), {}});
    uniform.items.push_back({item.item_id, std::nullopt, LabelDistribution::uniform(Level::one, 5), {}});
  }
  gold.reindex();
  uniform.reindex();
  auto r = eval_distribution(gold, corpus, Level::one);
  CHECK(r.jsd == 0.0);
  CHECK(r.md == 0.0);
  CHECK(r.ed == 0.0);
  r = eval_distribution(uniform, corpus, Level::one);
  CHECK(r.ce == doctest::Approx(std::log(5.0)));
  CHECK(r.n_items == 2);
}

TEST_CASE("eval_annotator_specific examples") {
  const auto corpus = make_corpus(item_votes("a", concat(repeat("cause", 5), repeat("conjunction", 5))));
  const auto item_level = label_set("ST.top1", {{"a", l1("contingency")}});
  auto r = eval_annotator_specific(item_level, corpus, Level::one);
  CHECK(r.accuracy == doctest::Approx(0.5));
  CHECK(r.n_pairs == 10);

  PredictionSet exact;
  exact.adapter = "AE";
  exact.level = Level::one;
  ItemPrediction p;
  p.item_id = "a";
  for (const auto& rec : corpus.items()[0].annotations) {
    p.per_worker[rec.worker_id] =
        LabelDistribution::one_hot(Level::one, 5, tax().project(rec.level, rec.ordinal, Level::one));
  }
  exact.items.push_back(p);
  exact.reindex();
  CHECK(eval_annotator_specific(exact, corpus, Level::one).accuracy == 1.0);

  exact.items[0].per_worker.erase("w3");
  exact.reindex();
  CHECK_THROWS_WITH_AS(eval_annotator_specific(exact, corpus, Level::one), doctest::Contains("w3"), ValidationError);
}

TEST_CASE("single-label and annotator accuracy agree on unanimous items") {
  const auto corpus = make_corpus(concat(concat(item_votes("a", repeat("cause", 4)), item_votes("b", repeat("norel", 4))),
                                         item_votes("c", repeat("conjunction", 4))));
  const auto preds = label_set("ST.top1", {{"a", l1("contingency")}, {"b", l1("expansion")}, {"c", l1("expansion")}});
  CHECK(eval_single_label(preds, corpus, Level::one).accuracy ==
        doctest::Approx(eval_annotator_specific(preds, corpus, Level::one).accuracy));
}

TEST_CASE("resampled paired t-test examples") {
  std::vector<double> a(30), b(30);
  for (int i = 0; i < 30; ++i) a[i] = b[i] = 0.5 + 0.01 * i;
  CHECK(resampled_paired_ttest(a, b) == 1.0);
  for (int i = 0; i < 30; ++i) b[i] = a[i] - 0.1;
  CHECK(resampled_paired_ttest(a, b) < 1e-12);
  CHECK_THROWS_AS(resampled_paired_ttest(std::vector<double>{1.0}, std::vector<double>{0.5}), ValidationError);

  int significant = 0;
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    Rng rng(derive_seed(trial, "ttest"));
    std::vector<double> x(30), y(30);
    for (int i = 0; i < 30; ++i) {
      x[i] = rng.normal(0.6, 0.01);
      y[i] = rng.normal(0.5, 0.01);
    }
    const double p = resampled_paired_ttest(x, y);
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
    significant += p < 0.05;
  }
  CHECK(significant >= 95);
}

TEST_CASE("resample plans are shared and sized") {
  const auto plan = make_resamples(100, 30, 0.8, 5);
  CHECK(plan.subsets.size() == 30);
  for (const auto& s : plan.subsets) {
    CHECK(s.size() == 80);
    std::set<std::size_t> unique(s.begin(), s.end());
    CHECK(unique.size() == 80);
  }
  CHECK(make_resamples(100, 30, 0.8, 5).subsets == plan.subsets);
  CHECK_THROWS_AS(make_resamples(100, 1, 0.8, 5), ValidationError);
}
