#include "disagree/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "disagree/error.hpp"

namespace disagree {

namespace {

void check_unit(double value, const char* what) {
  if (!(value >= 0.0 && value <= 1.0)) throw ValidationError(std::string(what) + " must lie in [0, 1]");
}

// Labels at `level` boosted by a preference. A preference may name a class
// coarser than `level`, in which case every descendant is boosted.
std::vector<std::size_t> preferred_ordinals(const AnnotatorArchetype& a, const Taxonomy& tax, Level level) {
  for (int lv = 1; lv <= to_int(level); ++lv) {
    const auto coarse = level_from_int(lv);
    const auto ord = tax.find(a.label, coarse);
    if (!ord) continue;
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < tax.size(level); ++i) {
      if (tax.project(level, i, coarse) == *ord) out.push_back(i);
    }
    return out;
  }
  return {tax.ordinal(tax.map_label(a.label, level), level)};
}

std::string padded(std::size_t value, std::size_t width) {
  auto s = std::to_string(value);
  if (s.size() < width) s.insert(0, width - s.size(), '0');
  return s;
}

}  // namespace

std::string_view to_string(ArchetypeKind kind) {
  switch (kind) {
    case ArchetypeKind::faithful:
      return "faithful";
    case ArchetypeKind::preference:
      return "preference";
    case ArchetypeKind::fallback:
      return "fallback";
    case ArchetypeKind::erratic:
      return "erratic";
  }
  return "faithful";
}

ArchetypeKind archetype_kind_from_string(std::string_view name) {
  for (auto k : {ArchetypeKind::faithful, ArchetypeKind::preference, ArchetypeKind::fallback, ArchetypeKind::erratic}) {
    if (to_string(k) == name) return k;
  }
  throw ValidationError("unknown archetype kind '" + std::string(name) + "'");
}

void AnnotatorArchetype::validate() const {
  check_unit(consistency, "archetype consistency");
  check_unit(rate, "archetype rate");
  if (!(strength >= 0.0) || !std::isfinite(strength)) throw ValidationError("preference strength must be >= 0");
  if (kind == ArchetypeKind::preference && label.empty()) {
    throw ValidationError("preference archetype '" + id + "' needs a label");
  }
}

nlohmann::json AnnotatorArchetype::to_json() const {
  nlohmann::json doc{{"id", id}, {"kind", to_string(kind)}, {"consistency", consistency}};
  if (kind == ArchetypeKind::preference) {
    doc["label"] = label;
    doc["strength"] = strength;
  }
  if (kind == ArchetypeKind::fallback || kind == ArchetypeKind::erratic) doc["rate"] = rate;
  return doc;
}

AnnotatorArchetype AnnotatorArchetype::from_json(const nlohmann::json& doc) {
  AnnotatorArchetype a;
  a.id = doc.value("id", "");
  a.kind = archetype_kind_from_string(doc.value("kind", "faithful"));
  a.label = doc.value("label", "");
  a.strength = doc.value("strength", 0.0);
  a.rate = doc.value("rate", 0.0);
  a.consistency = doc.value("consistency", 1.0);
  a.validate();
  return a;
}

std::vector<double> archetype_distribution(std::span<const double> gold, bool hard, const AnnotatorArchetype& archetype,
                                           const Taxonomy& taxonomy, Level level) {
  const std::size_t n = gold.size();
  std::vector<double> q(gold.begin(), gold.end());
  switch (archetype.kind) {
    case ArchetypeKind::faithful:
      break;
    case ArchetypeKind::preference: {
      for (auto l : preferred_ordinals(archetype, taxonomy, level)) q[l] *= 1.0 + archetype.strength;
      const double total = std::accumulate(q.begin(), q.end(), 0.0);
      for (auto& v : q) v /= total;
      break;
    }
    case ArchetypeKind::fallback:
      if (hard) {
        for (auto& v : q) v *= 1.0 - archetype.rate;
        q[taxonomy.norel_ordinal(level)] += archetype.rate;
      }
      break;
    case ArchetypeKind::erratic:
      for (auto& v : q) v = (1.0 - archetype.rate) * v + archetype.rate / static_cast<double>(n);
      break;
  }
  for (std::size_t i = 0; i < n; ++i) q[i] = archetype.consistency * q[i] + (1.0 - archetype.consistency) * gold[i];
  return q;
}

std::size_t sample_annotation(std::span<const double> gold, bool hard, const AnnotatorArchetype& archetype,
                              const Taxonomy& taxonomy, Level level, Rng& rng) {
  if (!rng.bernoulli(archetype.consistency)) return rng.categorical(gold);
  switch (archetype.kind) {
    case ArchetypeKind::faithful:
      break;
    case ArchetypeKind::preference: {
      std::vector<double> w(gold.begin(), gold.end());
      for (auto l : preferred_ordinals(archetype, taxonomy, level)) w[l] *= 1.0 + archetype.strength;
      return rng.categorical(w);
    }
    case ArchetypeKind::fallback:
      if (hard && rng.bernoulli(archetype.rate)) return taxonomy.norel_ordinal(level);
      break;
    case ArchetypeKind::erratic:
      if (rng.bernoulli(archetype.rate)) return rng.below(gold.size());
      break;
  }
  return rng.categorical(gold);
}

nlohmann::json ArchetypeGroup::to_json() const {
  return nlohmann::json{{"kind", to_string(kind)}, {"count", count},           {"strength", strength},
                        {"rate", rate},            {"consistency", consistency}, {"labels", labels}};
}

ArchetypeGroup ArchetypeGroup::from_json(const nlohmann::json& doc) {
  ArchetypeGroup g;
  g.kind = archetype_kind_from_string(doc.value("kind", "faithful"));
  g.count = doc.value("count", std::size_t{0});
  g.strength = doc.value("strength", 0.0);
  g.rate = doc.value("rate", 0.0);
  g.consistency = doc.value("consistency", 1.0);
  g.labels = doc.value("labels", std::vector<std::string>{});
  return g;
}

std::vector<ArchetypeGroup> SyntheticSpec::default_archetypes() {
  return {
      {ArchetypeKind::preference, 10, 1000.0, 0.0, 1.0, {}},
      {ArchetypeKind::fallback, 5, 0.0, 0.8, 0.9, {}},
      {ArchetypeKind::erratic, 5, 0.0, 0.3, 1.0, {}},
      {ArchetypeKind::faithful, 20, 0.0, 0.0, 1.0, {}},
  };
}

void SyntheticSpec::validate() const {
  if (n_items() == 0) throw ValidationError("synthetic spec needs at least one item");
  if (annotations_per_item == 0) throw ValidationError("annotations_per_item must be positive");
  if (n_workers < annotations_per_item) {
    throw ValidationError("n_workers (" + std::to_string(n_workers) + ") is below annotations_per_item (" +
                          std::to_string(annotations_per_item) + ")");
  }
  std::size_t total = 0;
  for (const auto& g : archetypes) {
    total += g.count;
    check_unit(g.rate, "archetype rate");
    check_unit(g.consistency, "archetype consistency");
    if (!(g.strength >= 0.0)) throw ValidationError("preference strength must be >= 0");
  }
  if (total != n_workers) {
    throw ValidationError("archetype mix covers " + std::to_string(total) + " workers but n_workers is " +
                          std::to_string(n_workers));
  }
  check_unit(hard_fraction, "hard_fraction");
  check_unit(signal_rate, "signal_rate");
  if (!(easy_alpha > 0.0) || !(hard_alpha > 0.0) || !(easy_primary_boost >= 0.0)) {
    throw ValidationError("Dirichlet concentrations must be positive");
  }
  if (hard_support == 0) throw ValidationError("hard_support must be positive");
  if (level == Level::one) throw ValidationError("synthetic labels must be Level-2 or Level-3 senses");
  if (keywords_per_label == 0 || noise_vocabulary == 0 || tokens_per_argument == 0) {
    throw ValidationError("text stub parameters must be positive");
  }
}

nlohmann::json SyntheticSpec::to_json() const {
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : archetypes) groups.push_back(g.to_json());
  return nlohmann::json{{"n_train", n_train},
                        {"n_dev", n_dev},
                        {"n_test", n_test},
                        {"n_workers", n_workers},
                        {"annotations_per_item", annotations_per_item},
                        {"level", to_int(level)},
                        {"easy_alpha", easy_alpha},
                        {"easy_primary_boost", easy_primary_boost},
                        {"hard_alpha", hard_alpha},
                        {"hard_support", hard_support},
                        {"hard_fraction", hard_fraction},
                        {"archetypes", groups},
                        {"activity_skew", activity_skew},
                        {"label_skew", label_skew},
                        {"keywords_per_label", keywords_per_label},
                        {"noise_vocabulary", noise_vocabulary},
                        {"tokens_per_argument", tokens_per_argument},
                        {"signal_rate", signal_rate},
                        {"seed", seed}};
}

SyntheticSpec SyntheticSpec::from_json(const nlohmann::json& doc) {
  SyntheticSpec s;
  s.n_train = doc.value("n_train", s.n_train);
  s.n_dev = doc.value("n_dev", s.n_dev);
  s.n_test = doc.value("n_test", s.n_test);
  s.n_workers = doc.value("n_workers", s.n_workers);
  s.annotations_per_item = doc.value("annotations_per_item", s.annotations_per_item);
  s.level = level_from_int(doc.value("level", to_int(s.level)));
  s.easy_alpha = doc.value("easy_alpha", s.easy_alpha);
  s.easy_primary_boost = doc.value("easy_primary_boost", s.easy_primary_boost);
  s.hard_alpha = doc.value("hard_alpha", s.hard_alpha);
  s.hard_support = doc.value("hard_support", s.hard_support);
  s.hard_fraction = doc.value("hard_fraction", s.hard_fraction);
  if (doc.contains("archetypes")) {
    s.archetypes.clear();
    for (const auto& g : doc["archetypes"]) s.archetypes.push_back(ArchetypeGroup::from_json(g));
  }
  s.activity_skew = doc.value("activity_skew", s.activity_skew);
  s.label_skew = doc.value("label_skew", s.label_skew);
  s.keywords_per_label = doc.value("keywords_per_label", s.keywords_per_label);
  s.noise_vocabulary = doc.value("noise_vocabulary", s.noise_vocabulary);
  s.tokens_per_argument = doc.value("tokens_per_argument", s.tokens_per_argument);
  s.signal_rate = doc.value("signal_rate", s.signal_rate);
  s.seed = doc.value("seed", s.seed);
  s.validate();
  return s;
}

nlohmann::json GroundTruth::to_json() const {
  nlohmann::json item_docs = nlohmann::json::array();
  for (const auto& [id, truth] : items) {
    item_docs.push_back({{"item_id", id}, {"gold", truth.gold}, {"hard", truth.hard}});
  }
  nlohmann::json worker_docs = nlohmann::json::array();
  for (const auto& w : workers) worker_docs.push_back(w.to_json());
  return nlohmann::json{{"level", to_int(level)}, {"items", item_docs}, {"workers", worker_docs}};
}

namespace {

std::vector<double> dirichlet(std::span<const double> alpha, Rng& rng) {
  std::vector<double> out(alpha.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (alpha[i] <= 0.0) continue;
    out[i] = rng.gamma(alpha[i]);
    total += out[i];
  }
  if (total <= 0.0) {
    // every draw underflowed; fall back to the largest concentration
    const auto top = static_cast<std::size_t>(std::max_element(alpha.begin(), alpha.end()) - alpha.begin());
    out[top] = 1.0;
    return out;
  }
  for (auto& v : out) v /= total;
  return out;
}

std::pair<std::size_t, std::size_t> top_two(const std::vector<double>& p) {
  std::size_t first = 0;
  for (std::size_t i = 1; i < p.size(); ++i) {
    if (p[i] > p[first]) first = i;
  }
  std::size_t second = first == 0 ? 1 : 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i != first && p[i] > p[second]) second = i;
  }
  return {first, second};
}

std::string keyword(std::size_t label, std::size_t j) { return "k" + std::to_string(label) + "w" + std::to_string(j); }

std::string text_stub(const SyntheticSpec& spec, std::size_t top1, std::size_t top2, bool hard, Rng& rng) {
  std::string out;
  for (std::size_t t = 0; t < spec.tokens_per_argument; ++t) {
    if (!out.empty()) out += ' ';
    if (rng.bernoulli(spec.signal_rate)) {
      const std::size_t pool = hard && rng.bernoulli(0.5) ? top2 : top1;
      out += keyword(pool, rng.below(spec.keywords_per_label));
    } else {
      out += "n" + std::to_string(rng.below(spec.noise_vocabulary));
    }
  }
  return out;
}

}  // namespace

SyntheticCorpus generate_corpus(const SyntheticSpec& spec, std::shared_ptr<const Taxonomy> taxonomy) {
  spec.validate();
  if (!taxonomy) taxonomy = std::make_shared<const Taxonomy>(Taxonomy::default_taxonomy());
  const auto& tax = *taxonomy;
  const Level level = spec.level;
  const std::size_t n_labels = tax.size(level);
  if (n_labels < 2) throw ValidationError("synthetic generation needs at least two labels");
  if (spec.hard_support > n_labels) throw ValidationError("hard_support exceeds the number of labels");

  // primary-label frequencies: Zipf over a seeded ranking of the labels
  std::vector<std::size_t> ranking(n_labels);
  std::iota(ranking.begin(), ranking.end(), std::size_t{0});
  Rng label_rng(derive_seed(spec.seed, "labels"));
  label_rng.shuffle(std::span<std::size_t>(ranking));
  std::vector<double> label_prior(n_labels);
  for (std::size_t r = 0; r < n_labels; ++r) {
    label_prior[ranking[r]] = 1.0 / std::pow(static_cast<double>(r + 1), spec.label_skew);
  }

  // workers
  // default preferences cycle through the coarse classes
  std::vector<std::string> coarse;
  for (const auto& name : tax.labels(Level::one)) {
    if (name != tax.norel()) coarse.push_back(name);
  }
  Rng worker_rng(derive_seed(spec.seed, "workers"));
  const std::size_t width = std::to_string(spec.n_workers).size();
  std::vector<AnnotatorArchetype> workers;
  std::size_t preference_index = 0;
  for (const auto& g : spec.archetypes) {
    for (std::size_t i = 0; i < g.count; ++i) {
      AnnotatorArchetype a;
      a.kind = g.kind;
      a.strength = g.strength;
      a.rate = g.rate;
      a.consistency = g.consistency;
      if (g.kind == ArchetypeKind::preference) {
        a.label = g.labels.empty() ? coarse[preference_index % coarse.size()]
                                   : normalize_label(g.labels[i % g.labels.size()]);
        if (!tax.contains(a.label)) throw ValidationError("unknown preference label '" + a.label + "'");
        ++preference_index;
      }
      workers.push_back(std::move(a));
    }
  }
  worker_rng.shuffle(std::span<AnnotatorArchetype>(workers));
  std::vector<double> activity(spec.n_workers);
  for (std::size_t w = 0; w < spec.n_workers; ++w) {
    workers[w].id = "w" + padded(w + 1, width);
    workers[w].validate();
    activity[w] = std::exp(spec.activity_skew * worker_rng.normal());
  }

  SyntheticCorpus out;
  out.truth.level = level;
  out.truth.workers = workers;
  CorpusBuilder builder(taxonomy);
  const std::size_t id_width = std::to_string(spec.n_items()).size();
  std::vector<double> support_weights(n_labels);
  std::vector<double> alpha(n_labels);
  std::vector<double> pick_weights(spec.n_workers);

  for (std::size_t i = 0; i < spec.n_items(); ++i) {
    const Split split = i < spec.n_train ? Split::train : (i < spec.n_train + spec.n_dev ? Split::dev : Split::test);
    const std::string item_id = "syn-" + padded(i + 1, id_width);
    Rng rng(derive_seed(spec.seed, "item:" + item_id));

    ItemTruth truth;
    truth.hard = rng.bernoulli(spec.hard_fraction);
    const std::size_t primary = rng.categorical(label_prior);
    if (truth.hard) {
      std::fill(alpha.begin(), alpha.end(), 0.0);
      alpha[primary] = spec.hard_alpha;
      support_weights = label_prior;
      support_weights[primary] = 0.0;
      for (std::size_t s = 1; s < spec.hard_support; ++s) {
        const auto extra = rng.categorical(support_weights);
        support_weights[extra] = 0.0;
        alpha[extra] = spec.hard_alpha;
      }
    } else {
      std::fill(alpha.begin(), alpha.end(), spec.easy_alpha);
      alpha[primary] += spec.easy_primary_boost;
    }
    truth.gold = dirichlet(alpha, rng);
    const auto [top1, top2] = top_two(truth.gold);

    ItemText text;
    text.item_id = item_id;
    text.arg1 = text_stub(spec, top1, top2, truth.hard, rng);
    text.arg2 = text_stub(spec, top1, top2, truth.hard, rng);
    builder.add_text(std::move(text));

    // annotators: weighted draws without replacement, kept in draw order
    pick_weights = activity;
    for (std::size_t a = 0; a < spec.annotations_per_item; ++a) {
      const auto w = rng.categorical(pick_weights);
      pick_weights[w] = 0.0;
      const auto label = sample_annotation(truth.gold, truth.hard, workers[w], tax, level, rng);
      builder.add_record(item_id, workers[w].id, tax.label(level, label), split);
    }
    out.truth.items.emplace(item_id, std::move(truth));
  }
  out.corpus = std::move(builder).build(true);
  return out;
}

}  // namespace disagree
