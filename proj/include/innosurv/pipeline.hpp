#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "innosurv/classifier.hpp"
#include "innosurv/config.hpp"
#include "innosurv/cox.hpp"
#include "innosurv/dataset.hpp"
#include "innosurv/mixture.hpp"
#include "innosurv/report.hpp"
#include "innosurv/resampling.hpp"

namespace innosurv {

// ---------------------------------------------------------------------------
// Dataset files: data.csv travels with a data.schema sidecar.

std::filesystem::path schema_path_for(const std::filesystem::path& csv);
Dataset load_dataset(const std::filesystem::path& csv, const CsvOptions& options = {});
void save_dataset(const Dataset& data, const std::filesystem::path& csv, const CsvOptions& options = {});

// Id column text per row, or 1-based row numbers when there is no id column.
std::vector<std::string> row_ids(const Dataset& data);
// Adds a "row_id" id column when the dataset has none.
Dataset ensure_id_column(const Dataset& data);

// ---------------------------------------------------------------------------
// Shared stage helpers (the single-stage subcommands call these too)

// Rows of `raw` that were classified (INN or NOINN), with a 0/1 `indicator`
// column holding the predicted label. A label column of the same name is
// kept as "<indicator>_true" with the feature role.
Dataset survival_dataset(const Dataset& raw, const std::vector<std::string>& ids, const AbstentionResult& labels,
                         const std::string& indicator);

// "auto" (most frequent levels), "standard" (C and MI for sector and location),
// or the path of a references file.
ReferenceLevels resolve_references(const std::string& spec, const Dataset& data);

struct CoxSuiteOptions {
  CoxOptions fit;
  bool screen = true;  // drop columns flagged by detect_separation before fitting
};

// Fits every formula; failures are recorded per model, never thrown.
std::vector<CoxModelResult> run_cox_models(const Dataset& data, const std::vector<std::string>& formulas,
                                           const ReferenceLevels& references, const CoxSuiteOptions& options);

// Splits "f1; f2; f3".
std::vector<std::string> split_formulas(const std::string& text);

using ModelSet = std::map<Algorithm, std::shared_ptr<const TrainedClassifier>>;

// Scores every model on the labelled `test` rows and writes one
// roc_<algorithm>.csv per model under `out`. The returned section has
// per-algorithm ROC/cutoff summaries and a ranking by AUC (ties by the
// canonical algorithm order).
struct ModelScores {
  std::vector<int> labels;
  std::map<Algorithm, std::vector<double>> scores;
  nlohmann::json section;
};
ModelScores evaluate_models(const ModelSet& models, const Dataset& test, const std::filesystem::path& out);

// Self-contained mixture file: weight, cutoffs and both component models.
nlohmann::json mixture_to_json(const MixtureModel& mixture);
MixtureModel mixture_from_json(const nlohmann::json& doc);
MixtureModel load_mixture(const std::filesystem::path& path);

// Searches the weight on labelled scores, writes roc.csv, roc.svg and
// mixture.json under `out` and returns the mix section.
nlohmann::json mix_stage(MixtureModel& mixture, const std::vector<double>& scores_a,
                         const std::vector<double>& scores_b, const std::vector<int>& labels, double grid_step,
                         const std::map<std::string, std::vector<double>>& other_scores,
                         const std::filesystem::path& out);

// Labels the cleaned predict-era rows (labels.csv under `out`) and builds
// the survival dataset from the matching raw rows.
struct PredictOutput {
  nlohmann::json section;
  Dataset survival;
};
PredictOutput predict_stage(const MixtureModel& mixture, const Dataset& clean, const Dataset& raw,
                            const std::string& indicator, const std::filesystem::path& out);

// km.csv, km.svg and logrank.json under `out`, grouped by the 0/1 column `group`.
nlohmann::json km_stage(const Dataset& survival, const std::string& group, double level, double horizon,
                        const std::filesystem::path& out);

// cox.json and cox.txt under `out`.
nlohmann::json cox_stage(const Dataset& survival, const std::vector<std::string>& formulas,
                         const std::string& references, const CoxSuiteOptions& options,
                         const std::filesystem::path& out, std::vector<CoxModelResult>* results = nullptr);

// ---------------------------------------------------------------------------
// The end-to-end pipeline

struct PipelineConfig {
  std::filesystem::path train_data;    // empty: synthetic
  std::filesystem::path predict_data;  // empty: synthetic
  std::filesystem::path output_dir = "innosurv-run";
  CsvOptions csv;
  SyntheticSpec synthetic;
  std::size_t synthetic_predict_rows = 10000;
  std::uint64_t seed = 1;
  bool clean = true;
  double mva_threshold = 0.30;
  SplitSpec split;
  SmoteSpec smote;
  std::vector<Algorithm> algorithms;
  ClassifierSpec classifier;
  std::vector<Algorithm> mix_components;  // empty: the two best by test AUC
  double grid_step = 0.01;
  double cutoff_low = 0.2;
  double cutoff_high = 0.8;
  std::string indicator = "inno";
  double km_level = 0.95;
  double km_horizon = 10.0;
  CoxSuiteOptions cox;
  std::string references = "auto";
  std::vector<std::string> cox_models;
  bool resume = false;

  Config echo;  // every effective setting, as text

  // Unknown keys and out-of-range values are ParseError / DomainError.
  static PipelineConfig from_config(const Config& config);
  static std::vector<std::string> known_keys();
};

struct PipelineOutcome {
  nlohmann::json report;
  std::string failed_stage;  // empty on success
  std::exception_ptr error;
};

// Runs data, clean, split, smote, train, evaluate, mix, predict, km and cox,
// writing every artifact under config.output_dir. On failure the partial
// report is still written and the error is returned, not thrown.
PipelineOutcome run_pipeline(const PipelineConfig& config);

// The report without its timing block; equal across identical runs.
nlohmann::json deterministic_view(const nlohmann::json& report);

}  // namespace innosurv
