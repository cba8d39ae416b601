#include "disagree/config.hpp"

#include <fstream>
#include <set>

#include "disagree/error.hpp"
#include "disagree/rng.hpp"

namespace disagree {

namespace {

void put_prefixed(nlohmann::json& flat, const std::string& prefix, const nlohmann::json& section) {
  for (const auto& [key, value] : section.items()) flat[prefix + key] = value;
}

nlohmann::json take_prefixed(const nlohmann::json& flat, const std::string& prefix) {
  nlohmann::json section = nlohmann::json::object();
  for (const auto& [key, value] : flat.items()) {
    if (key.rfind(prefix, 0) == 0) section[key.substr(prefix.size())] = value;
  }
  return section;
}

}  // namespace

nlohmann::json RunConfig::to_json() const {
  nlohmann::json flat = nlohmann::json::object();
  flat["paths.taxonomy"] = paths.taxonomy;
  flat["paths.annotations"] = paths.annotations;
  flat["paths.items"] = paths.items;
  flat["paths.model"] = paths.model;
  flat["paths.predictions"] = paths.predictions;
  flat["paths.out"] = paths.out;
  flat["encoder.kind"] = encoder.kind;
  flat["encoder.dim"] = encoder.dim;
  flat["encoder.seed"] = encoder.seed;
  flat["encoder.include_context"] = encoder.include_context;
  flat["encoder.vectors"] = encoder.vectors;
  flat["model.kind"] = to_string(kind);
  flat["model.level"] = to_int(level);
  put_prefixed(flat, "train.", train.to_json());
  flat["eval.include_absent_classes"] = eval.include_absent_classes;
  flat["eval.resamples"] = eval.resamples;
  flat["eval.resample_fraction"] = eval.resample_fraction;
  flat["eval.aggregate_all_annotators"] = eval.aggregate_all_annotators;
  flat["analysis.npmi_level"] = to_int(analysis.npmi_level);
  flat["analysis.confusion_level"] = to_int(analysis.confusion_level);
  flat["analysis.clusters"] = analysis.clusters;
  flat["analysis.restarts"] = analysis.restarts;
  flat["analysis.leave_one_out"] = analysis.leave_one_out;
  auto synth_doc = synth.to_json();
  synth_doc.erase("seed");
  put_prefixed(flat, "synth.", synth_doc);
  flat["seed"] = seed;
  return flat;
}

RunConfig RunConfig::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ValidationError("config must be a JSON object");
  static const nlohmann::json known = RunConfig{}.to_json();
  for (const auto& [key, value] : doc.items()) {
    if (!known.contains(key)) throw ValidationError("unknown config key '" + key + "'");
  }
  RunConfig c;
  try {
    c.paths.taxonomy = doc.value("paths.taxonomy", c.paths.taxonomy);
    c.paths.annotations = doc.value("paths.annotations", c.paths.annotations);
    c.paths.items = doc.value("paths.items", c.paths.items);
    c.paths.model = doc.value("paths.model", c.paths.model);
    c.paths.predictions = doc.value("paths.predictions", c.paths.predictions);
    c.paths.out = doc.value("paths.out", c.paths.out);
    c.encoder.kind = doc.value("encoder.kind", c.encoder.kind);
    c.encoder.dim = doc.value("encoder.dim", c.encoder.dim);
    c.encoder.seed = doc.value("encoder.seed", c.encoder.seed);
    c.encoder.include_context = doc.value("encoder.include_context", c.encoder.include_context);
    c.encoder.vectors = doc.value("encoder.vectors", c.encoder.vectors);
    if (doc.contains("model.kind")) c.kind = model_kind_from_string(doc["model.kind"].get<std::string>());
    c.level = level_from_int(doc.value("model.level", to_int(c.level)));
    c.train = TrainConfig::from_json(take_prefixed(doc, "train."));
    c.eval.include_absent_classes = doc.value("eval.include_absent_classes", c.eval.include_absent_classes);
    c.eval.resamples = doc.value("eval.resamples", c.eval.resamples);
    c.eval.resample_fraction = doc.value("eval.resample_fraction", c.eval.resample_fraction);
    c.eval.aggregate_all_annotators = doc.value("eval.aggregate_all_annotators", c.eval.aggregate_all_annotators);
    c.analysis.npmi_level = level_from_int(doc.value("analysis.npmi_level", to_int(c.analysis.npmi_level)));
    c.analysis.confusion_level =
        level_from_int(doc.value("analysis.confusion_level", to_int(c.analysis.confusion_level)));
    c.analysis.clusters = doc.value("analysis.clusters", c.analysis.clusters);
    c.analysis.restarts = doc.value("analysis.restarts", c.analysis.restarts);
    c.analysis.leave_one_out = doc.value("analysis.leave_one_out", c.analysis.leave_one_out);
    c.seed = doc.value("seed", c.seed);
    auto synth_doc = take_prefixed(doc, "synth.");
    synth_doc["seed"] = c.seed;
    c.synth = SyntheticSpec::from_json(synth_doc);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  if (c.encoder.kind != "hashed" && c.encoder.kind != "precomputed") {
    throw ValidationError("config: encoder.kind must be 'hashed' or 'precomputed'");
  }
  if (c.train.epochs == 0 || c.train.batch_size == 0 || c.train.hidden == 0) {
    throw ValidationError("config: train.epochs, train.batch_size and train.hidden must be positive");
  }
  if (c.eval.resamples < 2) throw ValidationError("config: eval.resamples must be at least 2");
  return c;
}

RunConfig RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file '" + path.string() + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("config file '" + path.string() + "' is not valid JSON");
  }
  return from_json(doc);
}

std::string RunConfig::hash() const {
  auto doc = to_json();
  for (auto it = doc.begin(); it != doc.end();) {
    if (it.key() == "seed" || it.key().rfind("paths.", 0) == 0) {
      it = doc.erase(it);
    } else {
      ++it;
    }
  }
  static constexpr char hex[] = "0123456789abcdef";
  auto h = fnv1a64(doc.dump());
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = hex[h & 0xf];
  return out;
}

std::unique_ptr<Encoder> make_encoder(const EncoderConfig& config) {
  if (config.kind == "precomputed") {
    if (config.vectors.empty()) throw ValidationError("precomputed encoder needs encoder.vectors");
    return std::make_unique<PrecomputedEncoder>(PrecomputedEncoder::load_file(config.vectors));
  }
  if (config.kind != "hashed") throw ValidationError("unknown encoder kind '" + config.kind + "'");
  return std::make_unique<HashedNgramEncoder>(config.dim, config.seed, config.include_context);
}

}  // namespace disagree
