#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "disagree/config.hpp"
#include "disagree/corpus.hpp"
#include "disagree/error.hpp"
#include "disagree/evaluation.hpp"
#include "disagree/perspectives.hpp"
#include "disagree/pipeline.hpp"
#include "disagree/synthgen.hpp"
#include "disagree/taxonomy.hpp"

namespace py = pybind11;
using namespace disagree;

namespace {

// JSON values cross the boundary through Python's json module.
py::object to_python(const nlohmann::json& doc) {
  return py::module_::import("json").attr("loads")(doc.dump());
}

nlohmann::json from_python(const py::object& obj) {
  const auto text = py::module_::import("json").attr("dumps")(obj).cast<std::string>();
  return nlohmann::json::parse(text);
}

Level level_arg(int level) { return level_from_int(level); }

Corpus load_corpus(const std::string& annotations, const std::optional<std::string>& items) {
  std::ifstream in(annotations);
  if (!in) throw ValidationError("cannot open annotations file '" + annotations + "'");
  auto tax = std::make_shared<const Taxonomy>(Taxonomy::default_taxonomy());
  if (items) {
    std::ifstream text(*items);
    if (!text) throw ValidationError("cannot open items file '" + *items + "'");
    return ingest_annotations(in, tax, std::nullopt, &text);
  }
  return ingest_annotations(in, tax);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Disagreement-aware discourse relation classifiers";
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);

  m.def("taxonomy_labels", [](int level) { return Taxonomy::default_taxonomy().labels(level_arg(level)); },
        py::arg("level"), "Labels of the default hierarchy at level 1, 2 or 3, in ordinal order.");
  m.def("map_label",
        [](const std::string& label, int level) { return Taxonomy::default_taxonomy().map_label(label, level_arg(level)); },
        py::arg("label"), py::arg("level"), "Ancestor of a label at a coarser level.");

  m.def(
      "soft_metrics",
      [](const std::vector<double>& pred, const std::vector<double>& gold) {
        const auto s = soft_metrics(pred, gold);
        return py::dict(py::arg("ce") = s.ce, py::arg("jsd") = s.jsd, py::arg("md") = s.md, py::arg("ed") = s.ed);
      },
      py::arg("pred"), py::arg("gold"), "Cross-entropy (nats), base-2 JSD, Manhattan and Euclidean distance.");
  m.def(
      "paired_ttest",
      [](const std::vector<double>& a, const std::vector<double>& b) { return resampled_paired_ttest(a, b); },
      py::arg("scores_a"), py::arg("scores_b"), "Two-sided paired t-test over per-resample scores.");

  m.def("npmi_from_counts", &npmi_from_counts, py::arg("joint"),
        "nPMI matrix from a worker-label by majority-label count matrix.");
  m.def(
      "kmeans",
      [](const std::vector<std::vector<double>>& points, std::size_t k, std::uint64_t seed, std::size_t restarts) {
        const auto r = kmeans(points, k, seed, restarts);
        return py::dict(py::arg("assignment") = r.assignment, py::arg("centroids") = r.centroids,
                        py::arg("wcss") = r.wcss);
      },
      py::arg("points"), py::arg("k"), py::arg("seed") = 0, py::arg("restarts") = 10);
  m.def(
      "adjusted_rand_index",
      [](const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) { return adjusted_rand_index(a, b); },
      py::arg("a"), py::arg("b"));

  m.def(
      "corpus_stats",
      [](const std::string& annotations, int level) {
        return to_python(corpus_stats(load_corpus(annotations, std::nullopt), level_arg(level)).to_json());
      },
      py::arg("annotations"), py::arg("level") = 2, "Summary statistics of a JSON-lines annotation file.");

  m.def(
      "synthesize",
      [](const py::object& spec, const std::filesystem::path& out_dir) {
        const auto s = spec.is_none() ? SyntheticSpec{} : SyntheticSpec::from_json(from_python(spec));
        const auto synthetic = generate_corpus(s);
        std::filesystem::create_directories(out_dir);
        std::ofstream ann(out_dir / "annotations.jsonl"), items(out_dir / "items.jsonl");
        write_annotations(ann, synthetic.corpus);
        write_item_texts(items, synthetic.corpus);
        return to_python(corpus_stats(synthetic.corpus, s.level).to_json());
      },
      py::arg("spec") = py::none(), py::arg("out_dir"),
      "Generates a synthetic corpus into out_dir and returns its statistics.");

  m.def(
      "default_config", []() { return to_python(RunConfig{}.to_json()); },
      "Flat default run configuration.");
  m.def(
      "replicate",
      [](const py::object& config, const std::filesystem::path& out_dir, bool save_models) {
        const auto c = config.is_none() ? RunConfig{} : RunConfig::from_json(from_python(config));
        ReplicateOptions options;
        options.save_models = save_models;
        nlohmann::json report;
        {
          py::gil_scoped_release release;
          report = replicate(c, out_dir, options);
        }
        return to_python(report);
      },
      py::arg("config") = py::none(), py::arg("out_dir"), py::arg("save_models") = false,
      "Runs the full synthetic experiment and returns the consolidated report.");

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, log;
        const int code = cli::run(args, out, log);
        return py::make_tuple(code, out.str(), log.str());
      },
      py::arg("args"), "Runs a command-line invocation in-process; returns (exit code, stdout, log).");
}
