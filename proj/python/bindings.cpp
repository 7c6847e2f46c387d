#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "innosurv/cli.hpp"
#include "innosurv/config.hpp"
#include "innosurv/cox.hpp"
#include "innosurv/evaluation.hpp"
#include "innosurv/mixture.hpp"
#include "innosurv/pipeline.hpp"
#include "innosurv/survival.hpp"

namespace py = pybind11;
using namespace innosurv;

namespace {

// Survival samples from parallel sequences; groups default to ungrouped.
std::vector<SurvivalSample> samples_of(const std::vector<double>& durations, const std::vector<int>& events,
                                       const std::vector<int>& groups) {
  if (durations.size() != events.size()) throw DomainError("durations and events differ in length");
  if (!groups.empty() && groups.size() != durations.size()) throw DomainError("groups and durations differ in length");
  std::vector<SurvivalSample> out(durations.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = {durations[i], events[i], groups.empty() ? -1 : groups[i]};
  return out;
}

py::dict curve_dict(const KMCurve& c) {
  py::dict d;
  d["n"] = c.n;
  d["times"] = c.times;
  d["at_risk"] = c.at_risk;
  d["deaths"] = c.deaths;
  d["survival"] = c.survival;
  d["variance"] = c.variance;
  d["ci_lower"] = c.ci_lower;
  d["ci_upper"] = c.ci_upper;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "innosurv core bindings";
  m.attr("__version__") = "1.0.0";

  auto error = py::register_exception<Error>(m, "Error");
  py::register_exception<ParseError>(m, "ParseError", error.ptr());
  py::register_exception<DomainError>(m, "DomainError", error.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", error.ptr());

  m.def(
      "auc", [](const std::vector<double>& s, const std::vector<int>& y) { return roc_curve(s, y).auc; },
      py::arg("scores"), py::arg("labels"), "Area under the ROC curve by the trapezoidal rule.");

  m.def(
      "roc",
      [](const std::vector<double>& s, const std::vector<int>& y) {
        const auto r = roc_curve(s, y);
        std::vector<std::tuple<double, double, double>> pts;
        for (const auto& p : r.points) pts.emplace_back(p.threshold, p.fpr, p.tpr);
        return py::make_tuple(pts, r.auc);
      },
      py::arg("scores"), py::arg("labels"), "ROC points as (threshold, fpr, tpr) and the AUC.");

  m.def(
      "select_cutoff",
      [](const std::vector<double>& s, const std::vector<int>& y, const std::string& criterion) {
        return select_cutoff(roc_curve(s, y), parse_cutoff_criterion(criterion));
      },
      py::arg("scores"), py::arg("labels"), py::arg("criterion") = "youden");

  m.def(
      "mix", [](const std::vector<double>& a, const std::vector<double>& b, double alpha) { return mix_scores(a, b, alpha); },
      py::arg("a"), py::arg("b"), py::arg("alpha"));

  m.def(
      "optimize_weight",
      [](const std::vector<double>& a, const std::vector<double>& b, const std::vector<int>& y, double step) {
        const auto w = optimize_weight(a, b, y, step);
        std::vector<std::tuple<double, double, double, double>> trace;
        for (const auto& p : w.trace) trace.emplace_back(p.alpha, p.auc, p.separation, p.objective);
        return py::make_tuple(w.alpha, trace);
      },
      py::arg("a"), py::arg("b"), py::arg("labels"), py::arg("grid_step") = 0.01,
      "Best weight of `a` and the trace of (alpha, auc, separation, objective).");

  m.def(
      "classify",
      [](const std::vector<double>& p, double low, double high) {
        const auto r = classify_probabilities(p, low, high);
        std::vector<std::string> out;
        for (auto l : r.labels) out.emplace_back(to_string(l));
        return out;
      },
      py::arg("probabilities"), py::arg("cutoff_low") = 0.2, py::arg("cutoff_high") = 0.8);

  m.def(
      "kaplan_meier",
      [](const std::vector<double>& t, const std::vector<int>& e, double level) {
        return curve_dict(km_analysis(samples_of(t, e, {}), level));
      },
      py::arg("durations"), py::arg("events"), py::arg("level") = 0.95);

  m.def(
      "logrank",
      [](const std::vector<double>& t, const std::vector<int>& e, const std::vector<int>& g) {
        const auto r = logrank_test(samples_of(t, e, g));
        return py::make_tuple(r.chi_square, r.p_value);
      },
      py::arg("durations"), py::arg("events"), py::arg("groups"), "Chi-square statistic and p-value.");

  m.def("hazard_ratio", &hazard_ratio, py::arg("beta"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<const char*> argv{"innosurv"};
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line tool in process; returns (exit code, stdout, stderr).");

  m.def(
      "run_pipeline",
      [](const std::map<std::string, std::string>& settings) {
        Config config;
        for (const auto& [k, v] : settings) config.set(k, v);
        const auto pc = PipelineConfig::from_config(config);
        PipelineOutcome outcome;
        {
          py::gil_scoped_release release;
          outcome = run_pipeline(pc);
        }
        if (outcome.error) std::rethrow_exception(outcome.error);
        return outcome.report.dump();
      },
      py::arg("settings"), "Runs the end-to-end pipeline; returns report.json as text.");
}
