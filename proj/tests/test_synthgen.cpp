#include <doctest.h>

#include <cmath>
#include <sstream>

#include "disagree/error.hpp"
#include "disagree/perspectives.hpp"
#include "disagree/synthgen.hpp"

using namespace disagree;

namespace {

const Taxonomy& tax() { return Taxonomy::default_taxonomy(); }
std::size_t l1(const char* label) { return tax().ordinal(label, Level::one); }
std::size_t l2(const char* label) { return tax().ordinal(label, Level::two); }

AnnotatorArchetype archetype(ArchetypeKind kind, std::string label = {}, double strength = 0.0, double rate = 0.0,
                             double consistency = 1.0) {
  AnnotatorArchetype a;
  a.id = "x";
  a.kind = kind;
  a.label = std::move(label);
  a.strength = strength;
  a.rate = rate;
  a.consistency = consistency;
  return a;
}

SyntheticSpec small_spec(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.n_train = 80;
  spec.n_dev = 10;
  spec.n_test = 10;
  spec.seed = seed;
  return spec;
}

std::vector<double> frequencies(const std::vector<double>& gold, bool hard, const AnnotatorArchetype& a, Level level,
                                std::size_t draws, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> f(gold.size(), 0.0);
  for (std::size_t i = 0; i < draws; ++i) f[sample_annotation(gold, hard, a, tax(), level, rng)] += 1.0;
  for (auto& x : f) x /= static_cast<double>(draws);
  return f;
}

}  // namespace

TEST_CASE("preference with zero strength is faithful") {
  const std::vector<double> gold{0.1, 0.3, 0.2, 0.25, 0.15};
  const auto f = frequencies(gold, false, archetype(ArchetypeKind::preference, "comparison", 0.0), Level::one, 10000, 1);
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const double sigma = std::sqrt(gold[i] * (1.0 - gold[i]) / 10000.0);
    CHECK(std::abs(f[i] - gold[i]) < 3.0 * sigma);
  }
}

TEST_CASE("saturated fallback always answers norel on hard items") {
  const std::vector<double> gold{0.2, 0.2, 0.2, 0.2, 0.2};
  const auto f = frequencies(gold, true, archetype(ArchetypeKind::fallback, {}, 0.0, 1.0), Level::one, 1000, 2);
  CHECK(f[l1("norel")] == 1.0);
  const auto easy = frequencies(gold, false, archetype(ArchetypeKind::fallback, {}, 0.0, 1.0), Level::one, 1000, 2);
  CHECK(easy[l1("norel")] < 0.5);
}

TEST_CASE("preference renormalization by hand") {
  std::vector<double> gold(5, 0.0);
  gold[l1("comparison")] = 0.2;
  gold[l1("contingency")] = 0.8;
  const auto a = archetype(ArchetypeKind::preference, "comparison", 4.0);
  const auto q = archetype_distribution(gold, false, a, tax(), Level::one);
  CHECK(q[l1("comparison")] == doctest::Approx(5.0 / 9.0));
  const auto f = frequencies(gold, false, a, Level::one, 10000, 3);
  CHECK(std::abs(f[l1("comparison")] - 5.0 / 9.0) < 0.02);
}

TEST_CASE("sampled frequencies converge to the analytic distribution") {
  Rng rng(4);
  const std::size_t n = tax().size(Level::two);
  std::vector<double> gold(n);
  double total = 0.0;
  for (auto& g : gold) total += (g = rng.gamma(0.7));
  for (auto& g : gold) g /= total;
  const std::vector<AnnotatorArchetype> kinds{
      archetype(ArchetypeKind::faithful), archetype(ArchetypeKind::preference, "expansion", 3.0, 0.0, 0.8),
      archetype(ArchetypeKind::preference, "cause", 2.0), archetype(ArchetypeKind::fallback, {}, 0.0, 0.6, 0.9),
      archetype(ArchetypeKind::erratic, {}, 0.0, 0.4)};
  std::uint64_t seed = 10;
  for (const auto& a : kinds) {
    for (bool hard : {false, true}) {
      const auto q = archetype_distribution(gold, hard, a, tax(), Level::two);
      const auto f = frequencies(gold, hard, a, Level::two, 10000, seed++);
      double worst = 0.0;
      for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(f[i] - q[i]));
      CHECK(worst < 0.02);
    }
  }
}

TEST_CASE("generate_corpus counts and determinism") {
  auto spec = small_spec(5);
  const auto a = generate_corpus(spec);
  CHECK(a.corpus.size() == 100);
  CHECK(a.corpus.record_count() == 1000);
  CHECK(a.truth.workers.size() == 40);
  CHECK(a.corpus.subset(Split::train).size() == 80);
  const auto b = generate_corpus(spec);
  std::ostringstream sa, sb;
  write_annotations(sa, a.corpus);
  write_annotations(sb, b.corpus);
  CHECK(sa.str() == sb.str());
  write_item_texts(sa, a.corpus);
  write_item_texts(sb, b.corpus);
  CHECK(sa.str() == sb.str());
  spec.seed = 6;
  std::ostringstream sc;
  write_annotations(sc, generate_corpus(spec).corpus);
  CHECK(sc.str() != sb.str());
}

TEST_CASE("all-faithful workers on easy items agree strongly") {
  for (std::uint64_t seed : {1, 2, 3}) {
    auto spec = small_spec(seed);
    spec.hard_fraction = 0.0;
    ArchetypeGroup faithful;
    faithful.count = 40;
    spec.archetypes = {faithful};
    const auto s = corpus_stats(generate_corpus(spec).corpus, Level::two);
    CHECK(s.agreement_rate >= 0.8);
  }
}

TEST_CASE("archetype mix must cover every worker") {
  auto spec = small_spec(1);
  spec.n_workers = 39;
  CHECK_THROWS_WITH_AS(generate_corpus(spec), doctest::Contains("archetype mix covers 40 workers"), ValidationError);
  spec = small_spec(1);
  spec.level = Level::one;
  CHECK_THROWS_AS(generate_corpus(spec), ValidationError);
}

TEST_CASE("spec round-trips through JSON") {
  const auto spec = small_spec(9);
  const auto again = SyntheticSpec::from_json(spec.to_json());
  CHECK(again.to_json() == spec.to_json());
}

TEST_CASE("fallback workers produce norel at the expected rate") {
  auto spec = small_spec(7);
  spec.n_train = 400;
  const auto synthetic = generate_corpus(spec);
  std::map<std::string, const AnnotatorArchetype*> kinds;
  for (const auto& w : synthetic.truth.workers) kinds[w.id] = &w;
  const auto norel = tax().norel_ordinal(Level::two);
  std::map<std::string, std::pair<double, double>> counts;
  for (const auto& item : synthetic.corpus.items()) {
    for (const auto& rec : item.annotations) {
      auto& [n, total] = counts[rec.worker_id];
      total += 1.0;
      n += tax().project(rec.level, rec.ordinal, Level::two) == norel;
    }
  }
  for (const auto& [id, c] : counts) {
    const auto* w = kinds.at(id);
    if (w->kind != ArchetypeKind::fallback || c.second < 50) continue;
    CHECK(c.first / c.second >= spec.hard_fraction * w->rate * w->consistency - 0.02 - 2.0 / std::sqrt(c.second));
  }
}

TEST_CASE("preference workers show a positive nPMI row for their class") {
  for (double strength : {3.0, 10.0}) {
    auto spec = small_spec(11);
    spec.n_train = 1500;
    ArchetypeGroup pref, faithful;
    pref.kind = ArchetypeKind::preference;
    pref.count = 8;
    pref.strength = strength;
    pref.labels = {"cause", "conjunction", "contrast", "synchronous"};
    faithful.count = 32;
    spec.archetypes = {pref, faithful};
    const auto synthetic = generate_corpus(spec);
    const auto& corpus = synthetic.corpus;
    for (const auto& w : synthetic.truth.workers) {
      if (w.kind != ArchetypeKind::preference) continue;
      const auto m = npmi_matrix(w.id, corpus, Level::two);
      const auto joint = worker_majority_counts(w.id, corpus, Level::two);
      const auto row = static_cast<Eigen::Index>(l2(w.label.c_str()));
      double sum = 0.0;
      int n = 0;
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        if (joint.col(c).sum() == 0.0) continue;
        sum += m(row, c);
        ++n;
      }
      REQUIRE(n > 0);
      CHECK_MESSAGE(sum / n > 0.0, w.id << " prefers " << w.label << " at strength " << strength);
    }
  }
}
