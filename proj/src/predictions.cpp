#include "disagree/predictions.hpp"

#include <algorithm>
#include <istream>
#include <ostream>

#include "disagree/error.hpp"

namespace disagree {

namespace {

struct AdapterInfo {
  std::string_view tag;
  ModelKind kind;
  AdapterOutput output;
};

constexpr AdapterInfo kAdapters[] = {
    {"ST.top1", ModelKind::st, AdapterOutput::label},
    {"ST.logit", ModelKind::st, AdapterOutput::distribution},
    {"multi.top1", ModelKind::multi, AdapterOutput::label},
    {"multi.logit", ModelKind::multi, AdapterOutput::distribution},
    {"dist.top1", ModelKind::dist, AdapterOutput::label},
    {"label-dist", ModelKind::dist, AdapterOutput::distribution},
    {"MT", ModelKind::mt, AdapterOutput::per_worker},
    {"MT.maj", ModelKind::mt, AdapterOutput::label},
    {"MT.logit", ModelKind::mt, AdapterOutput::distribution},
    {"AE", ModelKind::ae, AdapterOutput::per_worker},
    {"AE.maj", ModelKind::ae, AdapterOutput::label},
    {"AE.logit", ModelKind::ae, AdapterOutput::distribution},
};

const AdapterInfo& adapter_info(std::string_view adapter) {
  for (const auto& info : kAdapters) {
    if (info.tag == adapter) return info;
  }
  throw ValidationError("unknown adapter '" + std::string(adapter) + "'");
}

std::vector<double> json_probs(const nlohmann::json& doc, std::size_t line_no) {
  if (!doc.is_array()) throw ValidationError("prediction line " + std::to_string(line_no) + ": dist must be an array");
  return doc.get<std::vector<double>>();
}

}  // namespace

AdapterOutput adapter_output(std::string_view adapter) { return adapter_info(adapter).output; }
ModelKind adapter_kind(std::string_view adapter) { return adapter_info(adapter).kind; }

std::vector<std::string> adapters_for(ModelKind kind) {
  std::vector<std::string> out;
  for (const auto& info : kAdapters) {
    if (info.kind == kind) out.emplace_back(info.tag);
  }
  return out;
}

const ItemPrediction* PredictionSet::find(std::string_view item_id) const {
  if (index_.size() == items.size()) {
    auto it = index_.find(std::string(item_id));
    return it == index_.end() ? nullptr : &items[it->second];
  }
  // not reindexed since items were edited
  for (const auto& item : items) {
    if (item.item_id == item_id) return &item;
  }
  return nullptr;
}

void PredictionSet::reindex() {
  index_.clear();
  for (std::size_t i = 0; i < items.size(); ++i) index_.emplace(items[i].item_id, i);
}

void PredictionSet::validate(std::size_t num_labels) const {
  const auto output = adapter_output(adapter);
  for (const auto& item : items) {
    const bool has_label = item.label.has_value();
    const bool has_dist = item.distribution.has_value();
    const bool has_workers = !item.per_worker.empty();
    const bool ok = (output == AdapterOutput::label && has_label && !has_dist && !has_workers) ||
                    (output == AdapterOutput::distribution && has_dist && !has_label && !has_workers) ||
                    (output == AdapterOutput::per_worker && has_workers && !has_label && !has_dist);
    if (!ok) {
      throw ValidationError("prediction for item '" + item.item_id + "' does not match adapter '" + adapter + "'");
    }
    if (has_label && *item.label >= num_labels) {
      throw ValidationError("prediction label out of range for item '" + item.item_id + "'");
    }
    if (has_dist) item.distribution->validate(num_labels);
    for (const auto& [worker, dist] : item.per_worker) dist.validate(num_labels);
  }
}

void PredictionSet::write(std::ostream& out, const Taxonomy& taxonomy) const {
  nlohmann::json header{{"format", "disagree-predictions"},
                        {"version", 1},
                        {"adapter", adapter},
                        {"level", to_int(level)},
                        {"config_hash", config_hash},
                        {"seed", seed}};
  out << header.dump() << '\n';
  for (const auto& item : items) {
    if (item.label || item.distribution) {
      nlohmann::json rec{{"item_id", item.item_id}};
      if (item.label) rec["label"] = taxonomy.label(level, *item.label);
      if (item.distribution) rec["dist"] = item.distribution->probs;
      out << rec.dump() << '\n';
    }
    for (const auto& [worker, dist] : item.per_worker) {
      nlohmann::json rec{{"item_id", item.item_id}, {"worker_id", worker}, {"dist", dist.probs}};
      out << rec.dump() << '\n';
    }
  }
}

PredictionSet PredictionSet::read(std::istream& in, const Taxonomy& taxonomy) {
  PredictionSet set;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::unordered_map<std::string, std::size_t> index;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      throw ValidationError("prediction line " + std::to_string(line_no) + ": malformed record");
    }
    if (!have_header) {
      if (doc.value("format", "") != "disagree-predictions") {
        throw ValidationError("prediction file must start with a disagree-predictions header");
      }
      set.adapter = doc.at("adapter").get<std::string>();
      adapter_output(set.adapter);
      set.level = level_from_int(doc.at("level").get<int>());
      set.config_hash = doc.value("config_hash", "");
      set.seed = doc.value("seed", std::uint64_t{0});
      have_header = true;
      continue;
    }
    if (!doc.contains("item_id")) {
      throw ValidationError("prediction line " + std::to_string(line_no) + ": missing item_id");
    }
    const auto id = doc["item_id"].get<std::string>();
    auto [it, inserted] = index.emplace(id, set.items.size());
    if (inserted) set.items.push_back(ItemPrediction{id, std::nullopt, std::nullopt, {}});
    auto& item = set.items[it->second];
    if (doc.contains("worker_id")) {
      item.per_worker[doc["worker_id"].get<std::string>()] =
          LabelDistribution{set.level, json_probs(doc.at("dist"), line_no)};
      continue;
    }
    if (doc.contains("label")) item.label = taxonomy.ordinal(doc["label"].get<std::string>(), set.level);
    if (doc.contains("dist")) item.distribution = LabelDistribution{set.level, json_probs(doc["dist"], line_no)};
  }
  if (!have_header) throw ValidationError("prediction file is empty");
  set.reindex();
  set.validate(taxonomy.size(set.level));
  return set;
}

std::vector<PredictionSet> run_adapters(const Model& model, const Corpus& corpus, const Encoder& encoder,
                                        const std::vector<std::string>& adapters, const AdapterOptions& options) {
  if (model.encoder_fingerprint() != encoder.fingerprint()) {
    throw ValidationError("encoder mismatch: model was trained with '" + model.encoder_fingerprint() +
                          "' but got '" + encoder.fingerprint() + "'");
  }
  std::vector<PredictionSet> sets(adapters.size());
  for (std::size_t a = 0; a < adapters.size(); ++a) {
    if (adapter_kind(adapters[a]) != model.kind()) {
      throw ValidationError("adapter '" + adapters[a] + "' does not apply to a " + std::string(to_string(model.kind())) +
                            " model");
    }
    sets[a].adapter = adapters[a];
    sets[a].level = model.level();
    sets[a].seed = model.seed();
    sets[a].config_hash = model.config_hash();
    sets[a].items.reserve(corpus.size());
  }

  std::vector<std::size_t> all_workers(model.workers().size());
  for (std::size_t w = 0; w < all_workers.size(); ++w) all_workers[w] = w;

  for (const auto& item : corpus.items()) {
    const SparseVector x = encoder.encode_sparse(item);
    if (!is_perspectivist(model.kind())) {
      const Vector z = model.logits(x);
      LabelDistribution dist{model.level(), {}};
      if (model.kind() == ModelKind::multi) {
        const Vector s = sigmoid(z);
        dist.probs.assign(s.data(), s.data() + s.size());
        const double total = s.sum();
        for (auto& v : dist.probs) v /= total;
      } else {
        const Vector q = softmax(z);
        dist.probs.assign(q.data(), q.data() + q.size());
      }
      for (auto& set : sets) {
        ItemPrediction pred{item.item_id, std::nullopt, std::nullopt, {}};
        if (adapter_output(set.adapter) == AdapterOutput::label) {
          pred.label = argmax_with_tie_policy(dist.probs, model.priors());
        } else {
          pred.distribution = dist;
        }
        set.items.push_back(std::move(pred));
      }
      continue;
    }

    // item's own annotators, in record order
    std::vector<std::size_t> own;
    std::vector<std::string> own_ids;
    for (const auto& rec : item.annotations) {
      const auto w = model.worker_ordinal(rec.worker_id);
      if (!w) throw ValidationError("unknown annotator '" + rec.worker_id + "' on item '" + item.item_id + "'");
      own.push_back(*w);
      own_ids.push_back(rec.worker_id);
    }
    const auto& pool = options.aggregate_all_annotators ? all_workers : own;
    const auto logits = model.annotator_logits(x, pool);
    std::vector<LabelDistribution> dists;
    dists.reserve(logits.size());
    for (const auto& z : logits) {
      const Vector q = softmax(z);
      dists.push_back(LabelDistribution{model.level(), std::vector<double>(q.data(), q.data() + q.size())});
    }
    for (auto& set : sets) {
      ItemPrediction pred{item.item_id, std::nullopt, std::nullopt, {}};
      switch (adapter_output(set.adapter)) {
        case AdapterOutput::per_worker:
          for (std::size_t i = 0; i < own.size(); ++i) {
            const std::size_t at = options.aggregate_all_annotators ? own[i] : i;
            pred.per_worker.emplace(own_ids[i], dists[at]);
          }
          break;
        case AdapterOutput::label:
          pred.label = aggregate_majority(dists, model.priors());
          break;
        case AdapterOutput::distribution:
          pred.distribution = aggregate_mean(dists);
          break;
      }
      set.items.push_back(std::move(pred));
    }
  }
  for (auto& set : sets) set.reindex();
  return sets;
}

PredictionSet run_adapter(const Model& model, const Corpus& corpus, const Encoder& encoder, std::string_view adapter,
                          const AdapterOptions& options) {
  return std::move(run_adapters(model, corpus, encoder, {std::string(adapter)}, options).front());
}

}  // namespace disagree
