#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "innosurv/dataset.hpp"
#include "innosurv/features.hpp"
#include "innosurv/linear.hpp"
#include "innosurv/tree.hpp"

namespace innosurv {

enum class Algorithm { rpart, tree, ctree, bag, logit, nb, ann };

inline constexpr Algorithm kAllAlgorithms[] = {Algorithm::rpart, Algorithm::tree,  Algorithm::ctree, Algorithm::bag,
                                               Algorithm::logit, Algorithm::nb,    Algorithm::ann};

std::string_view to_string(Algorithm algorithm);
Algorithm parse_algorithm(std::string_view name);

struct ClassifierSpec {
  Algorithm algorithm = Algorithm::rpart;
  TreeParams tree;  // rpart, tree, ctree
  CtreeParams ctree;
  BagParams bag;
  LogitParams logit;
  NaiveBayesParams nb;
  AnnParams ann;
  std::uint64_t seed = 1;
};

using ModelState = std::variant<DecisionTree, BaggedTrees, LogitModel, NaiveBayesModel, AnnModel>;

// A fitted model of any of the seven kinds. Immutable after fitting; safe to
// share across threads for prediction.
struct TrainedClassifier {
  Algorithm algorithm = Algorithm::rpart;
  FeatureSchema schema;
  ModelState state;
};

TrainedClassifier fit_cart(const Dataset& train, const ClassifierSpec& spec);
TrainedClassifier fit_tree_deviance(const Dataset& train, const ClassifierSpec& spec);
TrainedClassifier fit_ctree(const Dataset& train, const ClassifierSpec& spec);
TrainedClassifier fit_bagging(const Dataset& train, const ClassifierSpec& spec);
TrainedClassifier fit_logit(const Dataset& train, const ClassifierSpec& spec);
TrainedClassifier fit_naive_bayes(const Dataset& train, const ClassifierSpec& spec);
TrainedClassifier fit_ann(const Dataset& train, const ClassifierSpec& spec);

// Dispatches on spec.algorithm.
TrainedClassifier fit_classifier(const Dataset& train, const ClassifierSpec& spec);

// One probability of label 1 per row. Levels unseen in training are mapped to
// the reference level and reported through `warnings`.
std::vector<double> predict_proba(const TrainedClassifier& model, const Dataset& data, Warnings* warnings = nullptr);
std::vector<double> predict_proba(const TrainedClassifier& model, const Matrix& raw);

// Versioned JSON serialization: {"format": "innosurv-model", "version": 1, ...}.
nlohmann::json to_json(const TrainedClassifier& model);
TrainedClassifier classifier_from_json(const nlohmann::json& doc);
void save_model(const TrainedClassifier& model, const std::filesystem::path& path);
TrainedClassifier load_model(const std::filesystem::path& path);

}  // namespace innosurv
