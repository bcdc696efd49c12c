#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "codewatch/classifier.hpp"
#include "codewatch/harness.hpp"
#include "codewatch/session_analysis.hpp"

namespace py = pybind11;
using namespace codewatch;

namespace {

// Documents cross the boundary as JSON text; the Python layer converts.
std::vector<SessionLog> decode_many(const std::string& documents) {
  Json doc;
  try {
    doc = Json::parse(documents);
  } catch (const Json::parse_error& e) {
    throw MalformedDocument(e.what());
  }
  std::vector<SessionLog> logs;
  if (doc.is_array()) {
    for (const auto& d : doc) logs.push_back(log_from_json(d));
  } else {
    logs.push_back(log_from_json(doc));
  }
  return logs;
}

std::vector<LineLabelKind> parse_labels(const std::vector<std::string>& tags) {
  std::vector<LineLabelKind> out;
  for (const auto& t : tags) {
    const auto k = parse_label_kind(t);
    if (!k) throw py::value_error("unknown label " + t);
    out.push_back(*k);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_codewatch, m) {
  m.doc() = "codewatch core bindings";

  // Kept alive for the interpreter's lifetime by the module attribute.
  static PyObject* validation_error = py::exception<ValidationFailed>(m, "ValidationError", PyExc_ValueError).ptr();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ValidationFailed& e) {
      py::object err = py::reinterpret_borrow<py::object>(validation_error)(py::str(e.what()));
      err.attr("violations") = py::cast(e.violations());
      PyErr_SetObject(validation_error, err.ptr());
    } catch (const MalformedDocument& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const LengthMismatch& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  m.def("validate", [](const std::string& document) -> std::vector<std::string> {
    try {
      decode_log(document);
    } catch (const ValidationFailed& e) {
      return e.violations();
    }
    return {};
  }, py::arg("document"), "Violations of one session document; empty when valid. Malformed input raises.");

  m.def("canonical", [](const std::string& document) { return encode_log(decode_log(document)); },
        py::arg("document"));

  m.def("reconstruct", [](const std::string& document, EpochMs paste_window_ms) {
    const auto log = decode_log(document);
    const auto tl = reconstruct(log, ReconstructOptions{paste_window_ms});
    Json out;
    out["timeline"] = timeline_to_json(tl);
    out["metrics"] = metrics_to_json(session_metrics(tl));
    return out.dump();
  }, py::arg("document"), py::arg("paste_window_ms") = kDefaultPasteWindowMs);

  m.def("normalize_line", &normalize_line, py::arg("line"));
  m.def("levenshtein", py::overload_cast<std::string_view, std::string_view>(&levenshtein), py::arg("a"),
        py::arg("b"));
  m.def("similarity", &similarity, py::arg("a"), py::arg("b"));
  m.def("label_for_score", [](int score) { return std::string(to_string(label_for_score(score))); },
        py::arg("score"));

  m.def("classify", [](const std::string& final_code, const std::string& logs, bool include_text,
                       bool include_line_field, bool include_paste, bool include_deletion) {
    const auto parsed = decode_many(logs);
    ClassifyOptions opts;
    opts.history = {include_text, include_line_field, include_paste, include_deletion};
    py::gil_scoped_release release;
    return report_to_json(classify_submission(final_code, parsed, opts)).dump();
  }, py::arg("final_code"), py::arg("logs"), py::arg("include_text") = true, py::arg("include_line_field") = true,
     py::arg("include_paste") = false, py::arg("include_deletion") = false);

  m.def("evaluate", [](const std::vector<std::string>& predicted, const std::vector<std::string>& truth) {
    const auto p = parse_labels(predicted);
    const auto t = parse_labels(truth);
    return evaluation_to_json(evaluate(p, t)).dump();
  }, py::arg("predicted"), py::arg("truth"));

  m.def("scenario_names", [] {
    std::vector<std::string> names;
    for (auto n : harness::kAllScenarios) names.emplace_back(harness::to_string(n));
    return names;
  });

  m.def("generate_logs", [](const std::string& name, std::uint64_t seed) {
    const auto scenario = harness::parse_scenario_name(name);
    if (!scenario) throw py::value_error("unknown scenario " + name);
    const auto sc = harness::generate(*scenario, seed);
    Json arr = Json::array();
    for (const auto& script : sc.scripts) {
      for (const auto& log : harness::capture(script, sc.name, seed, script.user)) arr.push_back(log_to_json(log));
    }
    return arr.dump();
  }, py::arg("name"), py::arg("seed") = 1, "Captured session logs of one generated scenario.");

  m.def("run_harness", [](std::uint64_t seed, std::size_t runs, double spurious_rate) {
    harness::HarnessConfig cfg;
    cfg.seed = seed;
    cfg.runs = runs;
    cfg.spurious_focus_rate = spurious_rate;
    py::gil_scoped_release release;
    return harness::run_harness(cfg).to_json().dump();
  }, py::arg("seed") = 1, py::arg("runs") = 1, py::arg("spurious_rate") = 0.10);
}
