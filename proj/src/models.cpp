#include "disagree/models.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>

#include "disagree/error.hpp"

namespace disagree {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::st: return "ST";
    case ModelKind::multi: return "MULTI";
    case ModelKind::dist: return "DIST";
    case ModelKind::mt: return "MT";
    case ModelKind::ae: return "AE";
  }
  return "ST";
}

ModelKind model_kind_from_string(std::string_view name) {
  std::string lower;
  for (unsigned char c : name) lower.push_back(static_cast<char>(std::tolower(c)));
  if (lower == "st") return ModelKind::st;
  if (lower == "multi") return ModelKind::multi;
  if (lower == "dist" || lower == "label-dist") return ModelKind::dist;
  if (lower == "mt") return ModelKind::mt;
  if (lower == "ae") return ModelKind::ae;
  throw ValidationError("unknown model kind '" + std::string(name) + "' (expected st, multi, dist, mt or ae)");
}

bool is_perspectivist(ModelKind kind) { return kind == ModelKind::mt || kind == ModelKind::ae; }

nlohmann::json TrainConfig::to_json() const {
  return nlohmann::json{{"hidden", hidden},
                        {"epochs", epochs},
                        {"batch_size", batch_size},
                        {"lr", adam.lr},
                        {"beta1", adam.beta1},
                        {"beta2", adam.beta2},
                        {"eps", adam.eps},
                        {"multilabel_threshold", multilabel_threshold},
                        {"ae_w_text", ae_w_text},
                        {"ae_w_annotator", ae_w_annotator},
                        {"ae_w_annotation", ae_w_annotation},
                        {"ae_freeze_mixing", ae_freeze_mixing}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& doc) {
  TrainConfig c;
  c.hidden = doc.value("hidden", c.hidden);
  c.epochs = doc.value("epochs", c.epochs);
  c.batch_size = doc.value("batch_size", c.batch_size);
  c.adam.lr = doc.value("lr", c.adam.lr);
  c.adam.beta1 = doc.value("beta1", c.adam.beta1);
  c.adam.beta2 = doc.value("beta2", c.adam.beta2);
  c.adam.eps = doc.value("eps", c.adam.eps);
  c.multilabel_threshold = doc.value("multilabel_threshold", c.multilabel_threshold);
  c.ae_w_text = doc.value("ae_w_text", c.ae_w_text);
  c.ae_w_annotator = doc.value("ae_w_annotator", c.ae_w_annotator);
  c.ae_w_annotation = doc.value("ae_w_annotation", c.ae_w_annotation);
  c.ae_freeze_mixing = doc.value("ae_freeze_mixing", c.ae_freeze_mixing);
  return c;
}

// Parameter layout. Every kind starts with the trunk; item-level kinds and AE
// then hold one output layer, MT holds one output layer per worker.
namespace {

constexpr std::size_t kTrunkW = 0;
constexpr std::size_t kTrunkB = 1;
constexpr std::size_t kOutW = 2;
constexpr std::size_t kOutB = 3;
// AE extras, after the output layer
constexpr std::size_t kAnnotatorEmb = 4;
constexpr std::size_t kLabelEmb = 5;
constexpr std::size_t kMix = 6;

std::size_t head_w(std::size_t worker) { return kOutW + 2 * worker; }
std::size_t head_b(std::size_t worker) { return kOutB + 2 * worker; }

Vector trunk_forward(const ParamStore& p, const SparseVector& x) {
  const Matrix& w = p.value(kTrunkW);
  if (x.dim != static_cast<std::size_t>(w.cols())) {
    throw ValidationError("encoded input has dimension " + std::to_string(x.dim) + ", model expects " +
                          std::to_string(w.cols()));
  }
  Vector z = p.value(kTrunkB).col(0);
  for (const auto& [j, v] : x.entries) z.noalias() += v * w.col(static_cast<Eigen::Index>(j));
  return z.array().tanh().matrix();
}

Vector ae_hidden(const ParamStore& p, const Matrix& freq, const Vector& text, std::size_t worker) {
  const Matrix& mix = p.value(kMix);
  const auto w = static_cast<Eigen::Index>(worker);
  Vector annotation = p.value(kLabelEmb) * freq.col(w);
  return mix(0, 0) * text + mix(1, 0) * p.value(kAnnotatorEmb).col(w) + mix(2, 0) * annotation;
}

}  // namespace

std::optional<std::size_t> Model::worker_ordinal(std::string_view worker_id) const {
  auto it = worker_index_.find(std::string(worker_id));
  if (it == worker_index_.end()) return std::nullopt;
  return it->second;
}

Vector Model::logits(const SparseVector& x) const {
  if (is_perspectivist(kind_)) {
    throw ValidationError(std::string(to_string(kind_)) + " models predict per annotator; use the annotator path");
  }
  const Vector f = trunk_forward(params_, x);
  return params_.value(kOutW) * f + params_.value(kOutB).col(0);
}

Vector Model::annotator_logits(const SparseVector& x, std::size_t worker) const {
  const std::size_t one[] = {worker};
  return std::move(annotator_logits(x, one).front());
}

std::vector<Vector> Model::annotator_logits(const SparseVector& x, std::span<const std::size_t> workers) const {
  if (!is_perspectivist(kind_)) {
    throw ValidationError(std::string(to_string(kind_)) + " models have no annotator-specific outputs");
  }
  const Vector f = trunk_forward(params_, x);
  std::vector<Vector> out;
  out.reserve(workers.size());
  for (auto worker : workers) {
    if (worker >= workers_.size()) throw ValidationError("worker ordinal out of range");
    if (kind_ == ModelKind::mt) {
      out.push_back(params_.value(head_w(worker)) * f + params_.value(head_b(worker)).col(0));
    } else {
      const Vector h = ae_hidden(params_, worker_label_freq_, f, worker);
      out.push_back(params_.value(kOutW) * h + params_.value(kOutB).col(0));
    }
  }
  return out;
}

// ---- checkpoints ------------------------------------------------------------------

nlohmann::json Model::to_json() const {
  nlohmann::json manifest;
  manifest["kind"] = to_string(kind_);
  manifest["level"] = to_int(level_);
  manifest["num_labels"] = num_labels_;
  manifest["input_dim"] = input_dim_;
  manifest["train_config"] = config_.to_json();
  manifest["worker_index"] = workers_;
  manifest["encoder"] = encoder_fingerprint_;
  manifest["priors"] = priors_.counts;
  manifest["seed"] = seed_;
  manifest["config_hash"] = config_hash_;
  manifest["epoch_losses"] = trace_.epoch_losses;
  if (kind_ == ModelKind::ae) {
    manifest["worker_label_freq"] = std::vector<double>(worker_label_freq_.data(),
                                                        worker_label_freq_.data() + worker_label_freq_.size());
  }
  return nlohmann::json{{"format", "disagree-model"},
                        {"version", 1},
                        {"config_hash", config_hash_},
                        {"seed", seed_},
                        {"manifest", std::move(manifest)},
                        {"params", params_.to_json()}};
}

Model Model::from_json(const nlohmann::json& doc) {
  try {
    if (doc.value("format", "") != "disagree-model") throw ValidationError("not a model checkpoint");
    const auto& m = doc.at("manifest");
    Model model;
    model.kind_ = model_kind_from_string(m.at("kind").get<std::string>());
    model.level_ = level_from_int(m.at("level").get<int>());
    model.num_labels_ = m.at("num_labels").get<std::size_t>();
    model.input_dim_ = m.at("input_dim").get<std::size_t>();
    model.config_ = TrainConfig::from_json(m.at("train_config"));
    model.workers_ = m.at("worker_index").get<std::vector<std::string>>();
    for (std::size_t i = 0; i < model.workers_.size(); ++i) model.worker_index_.emplace(model.workers_[i], i);
    model.encoder_fingerprint_ = m.at("encoder").get<std::string>();
    model.priors_ = LabelPriors{model.level_, m.at("priors").get<std::vector<double>>()};
    model.seed_ = m.at("seed").get<std::uint64_t>();
    model.config_hash_ = m.value("config_hash", "");
    model.trace_.epoch_losses = m.value("epoch_losses", std::vector<double>{});
    if (model.kind_ == ModelKind::ae) {
      const auto freq = m.at("worker_label_freq").get<std::vector<double>>();
      if (freq.size() != model.num_labels_ * model.workers_.size()) {
        throw ValidationError("worker label frequencies have the wrong size");
      }
      model.worker_label_freq_.resize(static_cast<Eigen::Index>(model.num_labels_),
                                      static_cast<Eigen::Index>(model.workers_.size()));
      std::copy(freq.begin(), freq.end(), model.worker_label_freq_.data());
    }
    model.params_ = ParamStore::from_json(doc.at("params"));
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed model checkpoint: ") + e.what());
  }
}

void Model::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  out << to_json().dump() << '\n';
}

Model Model::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open model " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("model " + path + ": " + e.what());
  }
  return from_json(doc);
}

// ---- training objective ----------------------------------------------------------------

TrainingObjective::TrainingObjective(ModelKind kind, const Corpus& train, const Encoder& encoder, Level level,
                                     const TrainConfig& config)
    : kind_(kind), level_(level), config_(config) {
  if (level == Level::three) throw ValidationError("Level-3 model training is not supported");
  if (train.empty()) throw ValidationError("training corpus is empty");
  if (to_int(level) > to_int(train.native_level())) {
    throw ValidationError("training labels are not available at level " + std::to_string(to_int(level)));
  }
  if (config.hidden == 0 || config.batch_size == 0) throw ValidationError("hidden size and batch size must be positive");
  const auto& tax = train.taxonomy();
  num_labels_ = tax.size(level);
  input_dim_ = encoder.dim();
  encoder_fingerprint_ = encoder.fingerprint();
  priors_ = train.priors(level);

  if (is_perspectivist(kind)) {
    for (const auto& item : train.items()) {
      for (const auto& rec : item.annotations) {
        if (rec.worker_id.empty()) {
          throw ValidationError("item '" + item.item_id + "' has a record without worker_id; " +
                                std::string(to_string(kind)) + " needs worker ids");
        }
      }
    }
    workers_ = train.workers();
  }
  std::unordered_map<std::string, std::size_t> worker_index;
  for (std::size_t i = 0; i < workers_.size(); ++i) worker_index.emplace(workers_[i], i);
  if (kind == ModelKind::ae) {
    worker_label_freq_ = Matrix::Zero(static_cast<Eigen::Index>(num_labels_), static_cast<Eigen::Index>(workers_.size()));
  }

  for (const auto& item : train.items()) {
    if (item.annotations.empty()) continue;
    inputs_.push_back(encoder.encode_sparse(item));
    switch (kind) {
      case ModelKind::st:
        single_targets_.push_back(majority_label(item, level, tax, priors_));
        break;
      case ModelKind::multi:
        set_targets_.push_back(multilabel_gold(item, level, tax, priors_, config.multilabel_threshold));
        break;
      case ModelKind::dist:
        dist_targets_.push_back(empirical_distribution(item, level, tax).probs);
        break;
      case ModelKind::mt:
      case ModelKind::ae: {
        std::vector<Vote> votes;
        for (const auto& rec : item.annotations) {
          const auto w = worker_index.at(rec.worker_id);
          const auto label = tax.project(rec.level, rec.ordinal, level);
          votes.push_back({w, label});
          if (kind == ModelKind::ae) {
            worker_label_freq_(static_cast<Eigen::Index>(label), static_cast<Eigen::Index>(w)) += 1.0;
          }
        }
        votes_.push_back(std::move(votes));
        break;
      }
    }
  }
  if (kind == ModelKind::ae) {
    for (Eigen::Index w = 0; w < worker_label_freq_.cols(); ++w) {
      const double total = worker_label_freq_.col(w).sum();
      if (total > 0.0) worker_label_freq_.col(w) /= total;
    }
  }
}

Model TrainingObjective::initial_model(Rng& rng) const {
  Model model;
  model.kind_ = kind_;
  model.level_ = level_;
  model.num_labels_ = num_labels_;
  model.input_dim_ = input_dim_;
  model.config_ = config_;
  model.workers_ = workers_;
  for (std::size_t i = 0; i < workers_.size(); ++i) model.worker_index_.emplace(workers_[i], i);
  model.worker_label_freq_ = worker_label_freq_;
  model.priors_ = priors_;
  model.encoder_fingerprint_ = encoder_fingerprint_;

  const auto hidden = static_cast<Eigen::Index>(config_.hidden);
  const auto labels = static_cast<Eigen::Index>(num_labels_);
  auto& p = model.params_;
  p.add_glorot("trunk.W", hidden, static_cast<Eigen::Index>(input_dim_), rng);
  p.add("trunk.b", hidden, 1);
  if (kind_ == ModelKind::mt) {
    for (std::size_t w = 0; w < workers_.size(); ++w) {
      p.add_glorot("head.W." + std::to_string(w), labels, hidden, rng);
      p.add("head.b." + std::to_string(w), labels, 1);
    }
  } else {
    p.add_glorot("out.W", labels, hidden, rng);
    p.add("out.b", labels, 1);
  }
  if (kind_ == ModelKind::ae) {
    p.add_glorot("annotator.emb", hidden, static_cast<Eigen::Index>(workers_.size()), rng);
    p.add_glorot("label.emb", hidden, labels, rng);
    const auto mix = p.add("mix", 3, 1);
    p.value(mix) << config_.ae_w_text, config_.ae_w_annotator, config_.ae_w_annotation;
  }
  return model;
}

double TrainingObjective::evaluate(const Model& model, std::span<const std::size_t> batch, Gradients* grads) const {
  const ParamStore& p = model.params_;
  const auto hidden = static_cast<Eigen::Index>(config_.hidden);

  std::size_t denom = 0;
  if (kind_ == ModelKind::ae) {
    for (auto i : batch) denom += votes_[i].size();
  } else {
    denom = batch.size();
  }
  if (denom == 0) return 0.0;
  const double scale = 1.0 / static_cast<double>(denom);

  double total = 0.0;
  Vector dtext(hidden);
  for (auto idx : batch) {
    const SparseVector& x = inputs_[idx];
    const Vector f = trunk_forward(p, x);
    dtext.setZero();

    auto item_level_step = [&](const LossValue& lv) {
      total += lv.loss;
      if (!grads) return;
      const Vector g = scale * lv.grad;
      (*grads)[kOutW].noalias() += g * f.transpose();
      (*grads)[kOutB].col(0) += g;
      dtext.noalias() += p.value(kOutW).transpose() * g;
    };

    switch (kind_) {
      case ModelKind::st: {
        const Vector z = p.value(kOutW) * f + p.value(kOutB).col(0);
        item_level_step(cross_entropy_loss(z, single_targets_[idx]));
        break;
      }
      case ModelKind::multi: {
        const Vector z = p.value(kOutW) * f + p.value(kOutB).col(0);
        item_level_step(bce_multilabel_loss(z, set_targets_[idx]));
        break;
      }
      case ModelKind::dist: {
        const Vector z = p.value(kOutW) * f + p.value(kOutB).col(0);
        item_level_step(kl_divergence_loss(z, dist_targets_[idx]));
        break;
      }
      case ModelKind::mt: {
        // cross-entropy per annotating worker's head, summed
        double summed = 0.0;
        for (const auto& vote : votes_[idx]) {
          const Matrix& w = p.value(head_w(vote.worker));
          const Vector z = w * f + p.value(head_b(vote.worker)).col(0);
          const LossValue lv = cross_entropy_loss(z, vote.label);
          summed += lv.loss;
          if (grads) {
            const Vector g = scale * lv.grad;
            (*grads)[head_w(vote.worker)].noalias() += g * f.transpose();
            (*grads)[head_b(vote.worker)].col(0) += g;
            dtext.noalias() += w.transpose() * g;
          }
        }
        total += summed;
        break;
      }
      case ModelKind::ae: {
        const Matrix& mix = p.value(kMix);
        for (const auto& vote : votes_[idx]) {
          const auto wcol = static_cast<Eigen::Index>(vote.worker);
          const Vector annotation = p.value(kLabelEmb) * worker_label_freq_.col(wcol);
          const auto annotator = p.value(kAnnotatorEmb).col(wcol);
          const Vector h = mix(0, 0) * f + mix(1, 0) * annotator + mix(2, 0) * annotation;
          const Vector z = p.value(kOutW) * h + p.value(kOutB).col(0);
          const LossValue lv = cross_entropy_loss(z, vote.label);
          total += lv.loss;
          if (!grads) continue;
          const Vector g = scale * lv.grad;
          (*grads)[kOutW].noalias() += g * h.transpose();
          (*grads)[kOutB].col(0) += g;
          const Vector dh = p.value(kOutW).transpose() * g;
          auto& dmix = (*grads)[kMix];
          dmix(0, 0) += dh.dot(f);
          dmix(1, 0) += dh.dot(annotator);
          dmix(2, 0) += dh.dot(annotation);
          (*grads)[kAnnotatorEmb].col(wcol) += mix(1, 0) * dh;
          (*grads)[kLabelEmb].noalias() += (mix(2, 0) * dh) * worker_label_freq_.col(wcol).transpose();
          dtext += mix(0, 0) * dh;
        }
        break;
      }
    }

    if (grads) {
      const Vector dz = (dtext.array() * (1.0 - f.array().square())).matrix();
      auto& dw = (*grads)[kTrunkW];
      for (const auto& [j, v] : x.entries) dw.col(static_cast<Eigen::Index>(j)).noalias() += v * dz;
      (*grads)[kTrunkB].col(0) += dz;
    }
  }
  return total * scale;
}

Model train(ModelKind kind, const Corpus& train, const Encoder& encoder, Level level, const TrainConfig& config,
            std::uint64_t seed) {
  const TrainingObjective objective(kind, train, encoder, level, config);
  Rng rng(seed);
  Model model = objective.initial_model(rng);
  model.seed_ = seed;

  std::vector<std::size_t> order(objective.instance_count());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Gradients grads = model.params_.zero_gradients();
  const bool freeze_mix = kind == ModelKind::ae && config.ae_freeze_mixing;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      for (auto& g : grads) g.setZero();
      const double loss =
          objective.evaluate(model, std::span<const std::size_t>(order.data() + start, end - start), &grads);
      if (freeze_mix) grads[kMix].setZero();
      optimizer_step(model.params_, grads, config.adam);
      model.trace_.batch_losses.push_back(loss);
      epoch_total += loss;
      ++batches;
    }
    model.trace_.epoch_losses.push_back(batches ? epoch_total / static_cast<double>(batches) : 0.0);
  }
  model.params_.check_finite();
  return model;
}

// ---- prediction ------------------------------------------------------------------------

namespace {

void check_encoder(const Model& model, const Encoder& encoder) {
  if (model.encoder_fingerprint() != encoder.fingerprint()) {
    throw ValidationError("encoder mismatch: model was trained with '" + model.encoder_fingerprint() +
                          "' but got '" + encoder.fingerprint() + "'");
  }
}

}  // namespace

LabelDistribution predict_distribution(const Model& model, const Item& item, const Encoder& encoder) {
  if (is_perspectivist(model.kind())) {
    throw ValidationError(std::string(to_string(model.kind())) +
                          " predicts per annotator; use predict_for_annotator or the aggregate adapters");
  }
  check_encoder(model, encoder);
  const Vector z = model.logits(encoder.encode_sparse(item));
  LabelDistribution out{model.level(), {}};
  if (model.kind() == ModelKind::multi) {
    const Vector s = sigmoid(z);
    const double total = s.sum();
    out.probs.assign(s.data(), s.data() + s.size());
    for (auto& v : out.probs) v /= total;
  } else {
    const Vector q = softmax(z);
    out.probs.assign(q.data(), q.data() + q.size());
  }
  return out;
}

std::size_t predict_top1(const Model& model, const Item& item, const Encoder& encoder, const LabelPriors* priors) {
  const auto dist = predict_distribution(model, item, encoder);
  return argmax_with_tie_policy(dist.probs, priors ? *priors : model.priors());
}

LabelDistribution predict_for_annotator(const Model& model, const Item& item, std::string_view worker_id,
                                        const Encoder& encoder) {
  if (!is_perspectivist(model.kind())) {
    throw ValidationError(std::string(to_string(model.kind())) + " models have no annotator support");
  }
  const auto worker = model.worker_ordinal(worker_id);
  if (!worker) throw ValidationError("unknown annotator '" + std::string(worker_id) + "'");
  check_encoder(model, encoder);
  const Vector q = softmax(model.annotator_logits(encoder.encode_sparse(item), *worker));
  return LabelDistribution{model.level(), std::vector<double>(q.data(), q.data() + q.size())};
}

std::size_t aggregate_majority(std::span<const LabelDistribution> per_worker, const LabelPriors& priors) {
  if (per_worker.empty()) throw ValidationError("majority aggregation needs at least one prediction");
  std::vector<double> votes(per_worker.front().size(), 0.0);
  for (const auto& d : per_worker) {
    if (d.size() != votes.size()) throw ValidationError("per-worker predictions have mixed sizes");
    votes[argmax_with_tie_policy(d.probs, priors)] += 1.0;
  }
  return argmax_with_tie_policy(votes, priors);
}

LabelDistribution aggregate_mean(std::span<const LabelDistribution> per_worker) {
  if (per_worker.empty()) throw ValidationError("mean aggregation needs at least one prediction");
  LabelDistribution out{per_worker.front().level, std::vector<double>(per_worker.front().size(), 0.0)};
  for (const auto& d : per_worker) {
    if (d.level != out.level || d.size() != out.size()) {
      throw ValidationError("cannot average distributions of mixed levels");
    }
    for (std::size_t k = 0; k < d.size(); ++k) out.probs[k] += d.probs[k];
  }
  const double n = static_cast<double>(per_worker.size());
  for (auto& v : out.probs) v /= n;
  return out;
}

}  // namespace disagree
