#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "disagree/models.hpp"
#include "disagree/synthgen.hpp"

namespace disagree {

struct EncoderConfig {
  std::string kind = "hashed";  // hashed | precomputed
  std::size_t dim = 4096;
  std::uint64_t seed = 0;
  bool include_context = false;
  std::string vectors;  // precomputed vector file
};

struct EvalConfig {
  bool include_absent_classes = false;
  std::size_t resamples = 30;
  double resample_fraction = 0.8;
  bool aggregate_all_annotators = false;
};

struct AnalysisConfig {
  Level npmi_level = Level::two;
  Level confusion_level = Level::one;
  std::size_t clusters = 3;
  std::size_t restarts = 10;
  bool leave_one_out = false;
};

struct PathConfig {
  std::string taxonomy;  // empty: shipped default
  std::string annotations;
  std::string items;
  std::string model;
  std::string predictions;
  std::string out;
};

/// Everything one invocation needs. The file form is a flat JSON object with
/// dotted keys ("train.epochs", "synth.n_train", ...); unknown keys are
/// rejected and absent keys keep their defaults.
struct RunConfig {
  PathConfig paths;
  EncoderConfig encoder;
  ModelKind kind = ModelKind::st;
  Level level = Level::two;
  TrainConfig train;
  EvalConfig eval;
  AnalysisConfig analysis;
  SyntheticSpec synth;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& doc);
  static RunConfig load_file(const std::filesystem::path& path);

  /// Hex digest of every setting except paths and the seed.
  std::string hash() const;
};

/// Encoder described by `config`.
std::unique_ptr<Encoder> make_encoder(const EncoderConfig& config);

}  // namespace disagree
