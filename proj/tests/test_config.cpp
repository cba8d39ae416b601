#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "disagree/config.hpp"
#include "disagree/error.hpp"

using namespace disagree;

TEST_CASE("defaults round-trip through the flat file form") {
  const RunConfig c;
  const auto again = RunConfig::from_json(c.to_json());
  CHECK(again.to_json() == c.to_json());
  CHECK(again.hash() == c.hash());
  CHECK(c.train.epochs == 10);
  CHECK(c.train.hidden == 256);
  CHECK(c.train.batch_size == 32);
  CHECK(c.encoder.dim == 4096);
  CHECK(c.eval.resamples == 30);
}

TEST_CASE("every field survives a non-default round-trip") {
  RunConfig c;
  c.paths.annotations = "a.jsonl";
  c.encoder.dim = 1024;
  c.encoder.include_context = true;
  c.kind = ModelKind::ae;
  c.level = Level::one;
  c.train.epochs = 3;
  c.train.adam.lr = 0.005;
  c.train.ae_freeze_mixing = true;
  c.eval.include_absent_classes = true;
  c.eval.aggregate_all_annotators = true;
  c.analysis.clusters = 4;
  c.analysis.leave_one_out = true;
  c.synth.n_train = 123;
  c.synth.hard_fraction = 0.5;
  c.seed = 77;
  const auto again = RunConfig::from_json(c.to_json());
  CHECK(again.to_json() == c.to_json());
  CHECK(again.synth.seed == 77);
}

TEST_CASE("partial documents keep defaults") {
  const auto c = RunConfig::from_json({{"train.epochs", 2}, {"seed", 5}});
  CHECK(c.train.epochs == 2);
  CHECK(c.train.hidden == 256);
  CHECK(c.seed == 5);
}

TEST_CASE("unknown keys and bad values are validation errors") {
  CHECK_THROWS_WITH_AS(RunConfig::from_json({{"train.epoch", 2}}), doctest::Contains("train.epoch"), ValidationError);
  CHECK_THROWS_AS(RunConfig::from_json({{"model.kind", "xx"}}), ValidationError);
  CHECK_THROWS_AS(RunConfig::from_json({{"model.level", 4}}), ValidationError);
  CHECK_THROWS_AS(RunConfig::from_json({{"train.epochs", "many"}}), ValidationError);
  CHECK_THROWS_AS(RunConfig::from_json({{"train.epochs", 0}}), ValidationError);
  CHECK_THROWS_AS(RunConfig::from_json(nlohmann::json::array()), ValidationError);
}

TEST_CASE("hash ignores paths and seed but not settings") {
  RunConfig a, b;
  b.paths.out = "elsewhere";
  b.seed = 9;
  CHECK(a.hash() == b.hash());
  b.train.epochs = 11;
  CHECK(a.hash() != b.hash());
  CHECK(a.hash().size() == 16);
}

TEST_CASE("load_file reads a document and rejects invalid JSON") {
  const auto dir = std::filesystem::temp_directory_path() / "disagree_config_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "ok.json") << R"({"encoder.dim": 512})";
    std::ofstream(dir / "bad.json") << "{nope";
  }
  CHECK(RunConfig::load_file(dir / "ok.json").encoder.dim == 512);
  CHECK_THROWS_AS(RunConfig::load_file(dir / "bad.json"), ValidationError);
  CHECK_THROWS_AS(RunConfig::load_file(dir / "missing.json"), ValidationError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("make_encoder honours the encoder settings") {
  EncoderConfig cfg;
  cfg.dim = 256;
  CHECK(make_encoder(cfg)->dim() == 256);
  cfg.kind = "precomputed";
  CHECK_THROWS_AS(make_encoder(cfg), ValidationError);
}
