// Python surface: JSON strings cross the boundary for structured values,
// labels travel as their surface form ("non-rumor", "rumor", "unverified").

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "evidistill/cli.hpp"
#include "evidistill/dataset.hpp"
#include "evidistill/error.hpp"
#include "evidistill/eval.hpp"
#include "evidistill/labels.hpp"
#include "evidistill/prompt.hpp"
#include "evidistill/retrieval.hpp"
#include "evidistill/serialization.hpp"
#include "evidistill/teacher.hpp"

namespace py = pybind11;
using namespace evidistill;

namespace {

StandardLabel to_label(const std::string& s) {
  if (auto l = label_from_surface(s)) return *l;
  throw Error(ErrorCode::ConfigInvalid, "unknown label '" + s + "'");
}

std::optional<std::string> to_surface(const std::optional<StandardLabel>& l) {
  if (!l) return std::nullopt;
  return std::string(surface(*l));
}

ProcessedInstance parse_instance(const std::string& j) { return instance_from_json(nlohmann::json::parse(j)); }

py::dict metrics_dict(const Metrics& m) {
  py::dict d;
  d["accuracy"] = m.accuracy;
  d["precision"] = m.precision;
  d["recall"] = m.recall;
  d["f1"] = m.f1;
  d["parse_failure_rate"] = m.parse_failure_rate;
  d["n"] = m.n;
  py::dict per;
  for (auto l : kAllLabels) {
    const auto& c = m.of(l);
    py::dict row;
    row["precision"] = c.precision;
    row["recall"] = c.recall;
    row["f1"] = c.f1;
    row["support"] = c.support;
    per[py::str(std::string(surface(l)))] = row;
  }
  d["per_class"] = per;
  return d;
}

}  // namespace

PYBIND11_MODULE(_evidistill, m) {
  m.doc() = "Bindings for the evidistill core library";

  static py::exception<Error> error(m, "Error");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object err = error;
      py::object inst = err(e.what());
      inst.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(error.ptr(), inst.ptr());
    }
  });

  m.def("canonicalize_label", &canonicalize_label);
  m.def("normalize_fine_grained", [](const std::string& s) { return to_surface(normalize_fine_grained(s)); },
        "Standard class of a fine-grained label, or None when unknown.");
  m.def("extract_label", [](const std::string& s) { return to_surface(extract_label(s)); },
        "Label named by generated text, or None on parse failure.");
  m.def("extract_fine_grained", [](const std::string& s) {
    std::vector<std::string> out;
    for (const auto& l : extract_fine_grained(s)) out.push_back(l.canonical_text);
    return out;
  });
  m.def("fine_grained_block", [](const std::string& g) { return fine_grained_block(to_label(g)); });
  m.def("terminal_sentence", [](const std::string& g) { return terminal_sentence(to_label(g)); });
  m.def("append_label_suffix", [](const std::string& raw, const std::string& g) {
    return append_label_suffix(raw, to_label(g));
  });

  m.def("render_labeling_prompt", [](const std::string& instance_json, const std::string& g) {
    return render_labeling_prompt(parse_instance(instance_json), to_label(g)).text;
  });
  m.def("render_inference_prompt", [](const std::string& instance_json) {
    return render_inference_prompt(parse_instance(instance_json)).text;
  });
  m.def("prompt_fingerprint", [](const std::string& instance_json, std::optional<std::string> g) {
    const auto x = parse_instance(instance_json);
    return g ? render_labeling_prompt(x, to_label(*g)).fingerprint : render_inference_prompt(x).fingerprint;
  }, py::arg("instance_json"), py::arg("gold") = py::none());
  m.def("select_evidence", [](const std::string& instance_json, std::size_t m_, std::size_t n_, std::size_t chars) {
    return to_json(with_selected_evidence(parse_instance(instance_json), m_, n_, chars)).dump();
  }, py::arg("instance_json"), py::arg("max_textual"), py::arg("max_visual"), py::arg("max_item_chars") = 500);

  m.def("compute_metrics", [](const std::vector<std::string>& golds, const std::vector<std::optional<std::string>>& preds) {
    std::vector<StandardLabel> g;
    std::vector<Prediction> p;
    for (const auto& s : golds) g.push_back(to_label(s));
    for (const auto& s : preds) p.push_back(s ? Prediction{to_label(*s)} : Prediction{});
    return metrics_dict(compute_metrics(g, p));
  }, "Predictions of None count as parse failures.");

  m.def("split_dataset", [](const std::vector<std::string>& records_jsonl, const std::vector<std::string>& labels,
                            double fraction, std::uint64_t seed) {
    std::vector<InstructionRecord> records;
    for (const auto& r : records_jsonl) records.push_back(instruction_from_json(nlohmann::json::parse(r)));
    std::vector<StandardLabel> ls;
    for (const auto& s : labels) ls.push_back(to_label(s));
    auto split = split_dataset(std::move(records), ls, fraction, seed);
    std::vector<std::string> train, test;
    for (const auto& r : split.train) train.push_back(to_json(r).dump());
    for (const auto& r : split.test) test.push_back(to_json(r).dump());
    return py::make_tuple(train, test);
  });

  m.def("stats_table_from_counts", [](const std::string& tsv) { return render_stats_table(parse_stats_tsv(tsv)); });

  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::vector<std::string> argv{"evidistill"};
    argv.insert(argv.end(), args.begin(), args.end());
    std::ostringstream out, err;
    int code;
    {
      py::gil_scoped_release release;
      code = cli::run(argv, out, err);
    }
    return py::make_tuple(code, out.str(), err.str());
  }, "Runs one CLI invocation in-process; returns (exit_code, stdout, stderr).");
}
