#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "innosurv/cleansing.hpp"
#include "innosurv/cox.hpp"
#include "innosurv/evaluation.hpp"
#include "innosurv/mixture.hpp"
#include "innosurv/survival.hpp"

namespace innosurv {

inline constexpr int kReportSchemaVersion = 1;
inline constexpr const char* kToolVersion = "1.0.0";

// JSON views of module results. Non-finite numbers become null.
nlohmann::json number_or_null(double v);
nlohmann::json to_json(const MvaReport& report);
nlohmann::json to_json(const ConfusionMatrix& m);
nlohmann::json to_json(const ScoreEvaluation& evaluation);
nlohmann::json to_json(const WeightSearch& search);
nlohmann::json to_json(const AbstentionResult& result);
nlohmann::json to_json(const KMCurve& curve);
nlohmann::json to_json(const LogrankResult& result);
nlohmann::json to_json(const WelchResult& result);

struct CoxModelResult {
  std::string label;    // "(1)", "(2)", ...
  std::string formula;
  std::size_t n = 0;
  std::size_t events = 0;
  DesignMatrix design;  // p() == 0 when the model failed before fitting
  std::vector<SeparationFlag> flags;
  std::optional<CoxFit> fit;
  std::optional<CoxTests> tests;
  std::string error;  // set when the model could not be fitted
  std::string error_kind;
};

nlohmann::json to_json(const CoxModelResult& model);

// roc.csv: threshold,fpr,tpr
std::string roc_csv(const RocCurve& roc);
// km.csv: group,time,at_risk,deaths,survival,sd,ci_lo,ci_hi (undefined cells empty)
std::string km_csv(const std::map<std::string, KMCurve>& curves);
// labels.csv: id,probability,label
std::string labels_csv(const std::vector<std::string>& ids, const std::vector<double>& probabilities,
                       const AbstentionResult& labels);

// Fixed-width side-by-side table in the layout of a regression summary:
// coefficients with standard errors and significance stars, then n, log
// likelihood, the three tests and degrees of freedom per model.
std::string cox_summary_table(const std::vector<CoxModelResult>& models);

// Structural check of a run report. Returns the list of problems (empty when valid).
std::vector<std::string> validate_report(const nlohmann::json& report);

// Stable serialization used for every emitted JSON file.
std::string dump_json(const nlohmann::json& doc);

}  // namespace innosurv
