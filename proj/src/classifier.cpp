#include "innosurv/classifier.hpp"

#include "innosurv/errors.hpp"
#include "innosurv/io.hpp"

namespace innosurv {

using nlohmann::json;

namespace {

struct Prepared {
  FeatureSchema schema;
  Matrix raw;
  std::vector<int> y;
};

Prepared prepare(const Dataset& train) {
  if (train.n_rows() == 0) throw DomainError("cannot train on zero rows");
  Prepared p;
  p.schema = FeatureSchema::from_training(train);
  p.raw = p.schema.bind(train);
  p.y = binary_labels(train);
  return p;
}

std::vector<bool> numeric_mask(const FeatureSchema& schema) {
  std::vector<bool> mask;
  for (const auto& f : schema.features()) {
    if (f.kind == ColumnKind::numeric)
      mask.push_back(true);
    else
      mask.insert(mask.end(), f.levels.size() - 1, false);
  }
  return mask;
}

}  // namespace

std::string_view to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::rpart: return "rpart";
    case Algorithm::tree: return "tree";
    case Algorithm::ctree: return "ctree";
    case Algorithm::bag: return "bag";
    case Algorithm::logit: return "logit";
    case Algorithm::nb: return "nb";
    case Algorithm::ann: return "ann";
  }
  return "rpart";
}

Algorithm parse_algorithm(std::string_view name) {
  for (auto a : kAllAlgorithms)
    if (to_string(a) == name) return a;
  throw DomainError("unknown algorithm '" + std::string(name) + "' (expected rpart, tree, ctree, bag, logit, nb, ann)");
}

TrainedClassifier fit_cart(const Dataset& train, const ClassifierSpec& spec) {
  auto p = prepare(train);
  auto tree = grow_tree(p.raw, p.y, p.schema, SplitCriterion::gini, spec.tree);
  return {Algorithm::rpart, std::move(p.schema), std::move(tree)};
}

TrainedClassifier fit_tree_deviance(const Dataset& train, const ClassifierSpec& spec) {
  auto p = prepare(train);
  auto tree = grow_tree(p.raw, p.y, p.schema, SplitCriterion::entropy, spec.tree);
  return {Algorithm::tree, std::move(p.schema), std::move(tree)};
}

TrainedClassifier fit_ctree(const Dataset& train, const ClassifierSpec& spec) {
  auto p = prepare(train);
  auto tree = grow_ctree(p.raw, p.y, p.schema, spec.tree, spec.ctree, substream_seed(spec.seed, "ctree"));
  return {Algorithm::ctree, std::move(p.schema), std::move(tree)};
}

TrainedClassifier fit_bagging(const Dataset& train, const ClassifierSpec& spec) {
  auto p = prepare(train);
  auto bag = grow_bagging(p.raw, p.y, p.schema, spec.bag, spec.seed);
  return {Algorithm::bag, std::move(p.schema), std::move(bag)};
}

TrainedClassifier fit_logit(const Dataset& train, const ClassifierSpec& spec) {
  auto p = prepare(train);
  const auto x = p.schema.encode(p.raw);
  const auto names = p.schema.encoded_names();
  auto model = fit_logit_matrix(x, p.y, names, spec.logit);
  return {Algorithm::logit, std::move(p.schema), std::move(model)};
}

TrainedClassifier fit_naive_bayes(const Dataset& train, const ClassifierSpec& spec) {
  auto p = prepare(train);
  auto model = fit_naive_bayes_matrix(p.raw, p.y, p.schema, spec.nb);
  return {Algorithm::nb, std::move(p.schema), std::move(model)};
}

TrainedClassifier fit_ann(const Dataset& train, const ClassifierSpec& spec) {
  auto p = prepare(train);
  const auto x = p.schema.encode(p.raw);
  auto model = fit_ann_matrix(x, p.y, numeric_mask(p.schema), spec.ann, substream_seed(spec.seed, "ann"));
  return {Algorithm::ann, std::move(p.schema), std::move(model)};
}

TrainedClassifier fit_classifier(const Dataset& train, const ClassifierSpec& spec) {
  switch (spec.algorithm) {
    case Algorithm::rpart: return fit_cart(train, spec);
    case Algorithm::tree: return fit_tree_deviance(train, spec);
    case Algorithm::ctree: return fit_ctree(train, spec);
    case Algorithm::bag: return fit_bagging(train, spec);
    case Algorithm::logit: return fit_logit(train, spec);
    case Algorithm::nb: return fit_naive_bayes(train, spec);
    case Algorithm::ann: return fit_ann(train, spec);
  }
  throw DomainError("unknown algorithm");
}

std::vector<double> predict_proba(const TrainedClassifier& model, const Matrix& raw) {
  std::vector<double> out(raw.rows);
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LogitModel> || std::is_same_v<T, AnnModel>) {
          std::vector<double> enc(model.schema.encoded_width());
          for (std::size_t r = 0; r < raw.rows; ++r) {
            model.schema.encode_row(raw.row(r), enc);
            out[r] = m.predict(enc);
          }
        } else {
          for (std::size_t r = 0; r < raw.rows; ++r) out[r] = m.predict(raw.row(r));
        }
      },
      model.state);
  return out;
}

std::vector<double> predict_proba(const TrainedClassifier& model, const Dataset& data, Warnings* warnings) {
  return predict_proba(model, model.schema.bind(data, warnings));
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

json tree_json(const DecisionTree& tree) {
  json nodes = json::array();
  for (const auto& n : tree.nodes) {
    json j = {{"feature", n.feature}, {"p", n.probability}, {"n", n.n}};
    if (!n.is_leaf()) {
      j["left"] = n.left;
      j["right"] = n.right;
      if (n.left_levels.empty())
        j["threshold"] = n.threshold;
      else
        j["left_levels"] = n.left_levels;
    }
    nodes.push_back(std::move(j));
  }
  return nodes;
}

DecisionTree tree_from_json(const json& nodes) {
  DecisionTree tree;
  for (const auto& j : nodes) {
    TreeNode n;
    n.feature = j.at("feature").get<int>();
    n.probability = j.at("p").get<double>();
    n.n = j.at("n").get<std::size_t>();
    if (!n.is_leaf()) {
      n.left = j.at("left").get<int>();
      n.right = j.at("right").get<int>();
      if (j.contains("left_levels"))
        n.left_levels = j.at("left_levels").get<std::vector<std::uint8_t>>();
      else
        n.threshold = j.at("threshold").get<double>();
    }
    tree.nodes.push_back(std::move(n));
  }
  const auto count = static_cast<int>(tree.nodes.size());
  if (count == 0) throw ParseError("model: tree without nodes");
  for (const auto& n : tree.nodes)
    if (!n.is_leaf() && (n.left <= 0 || n.right <= 0 || n.left >= count || n.right >= count))
      throw ParseError("model: tree node refers to a missing child");
  return tree;
}

}  // namespace

json to_json(const TrainedClassifier& model) {
  json features = json::array();
  for (const auto& f : model.schema.features()) {
    json j = {{"name", f.name}, {"kind", std::string(to_string(f.kind))}};
    if (f.kind == ColumnKind::categorical) {
      j["levels"] = f.levels;
      j["reference"] = f.reference;
    }
    features.push_back(std::move(j));
  }
  json doc = {{"format", "innosurv-model"},
              {"version", 1},
              {"algorithm", std::string(to_string(model.algorithm))},
              {"features", std::move(features)}};
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, DecisionTree>) {
          doc["tree"] = tree_json(m);
        } else if constexpr (std::is_same_v<T, BaggedTrees>) {
          json members = json::array();
          for (const auto& t : m.members) members.push_back(tree_json(t));
          doc["members"] = std::move(members);
        } else if constexpr (std::is_same_v<T, LogitModel>) {
          doc["intercept"] = m.intercept;
          doc["coefficients"] = m.coefficients;
          doc["iterations"] = m.iterations;
          doc["loglik"] = m.loglik;
        } else if constexpr (std::is_same_v<T, NaiveBayesModel>) {
          doc["prior"] = {m.prior[0], m.prior[1]};
          json fs = json::array();
          for (const auto& f : m.features) {
            if (f.kind == ColumnKind::numeric)
              fs.push_back({{"mean", {f.mean[0], f.mean[1]}}, {"var", {f.var[0], f.var[1]}}});
            else
              fs.push_back({{"log_prob", {f.log_prob[0], f.log_prob[1]}}});
          }
          doc["likelihoods"] = std::move(fs);
        } else {
          doc["inputs"] = m.shape.inputs;
          doc["hidden"] = m.shape.hidden;
          doc["center"] = m.center;
          doc["scale"] = m.scale;
          doc["params"] = m.params;
          doc["final_loss"] = m.final_loss;
        }
      },
      model.state);
  return doc;
}

TrainedClassifier classifier_from_json(const json& doc) {
  try {
    if (doc.at("format") != "innosurv-model") throw ParseError("not an innosurv model file");
    if (doc.at("version") != 1) throw ParseError("unsupported model version " + doc.at("version").dump());
    TrainedClassifier model;
    model.algorithm = parse_algorithm(doc.at("algorithm").get<std::string>());
    std::vector<FeatureInfo> features;
    for (const auto& j : doc.at("features")) {
      FeatureInfo f;
      f.name = j.at("name").get<std::string>();
      f.kind = parse_column_kind(j.at("kind").get<std::string>());
      if (f.kind == ColumnKind::categorical) {
        f.levels = j.at("levels").get<std::vector<std::string>>();
        f.reference = j.at("reference").get<std::size_t>();
      }
      features.push_back(std::move(f));
    }
    model.schema = FeatureSchema(std::move(features));
    switch (model.algorithm) {
      case Algorithm::rpart:
      case Algorithm::tree:
      case Algorithm::ctree:
        model.state = tree_from_json(doc.at("tree"));
        break;
      case Algorithm::bag: {
        BaggedTrees bag;
        for (const auto& t : doc.at("members")) bag.members.push_back(tree_from_json(t));
        if (bag.members.empty()) throw ParseError("model: bagging without members");
        model.state = std::move(bag);
        break;
      }
      case Algorithm::logit: {
        LogitModel m;
        m.intercept = doc.at("intercept").get<double>();
        m.coefficients = doc.at("coefficients").get<std::vector<double>>();
        m.iterations = doc.at("iterations").get<std::size_t>();
        m.loglik = doc.at("loglik").get<double>();
        if (m.coefficients.size() != model.schema.encoded_width()) throw ParseError("model: coefficient count mismatch");
        model.state = std::move(m);
        break;
      }
      case Algorithm::nb: {
        NaiveBayesModel m;
        const auto prior = doc.at("prior").get<std::vector<double>>();
        m.prior[0] = prior.at(0);
        m.prior[1] = prior.at(1);
        const auto& fs = doc.at("likelihoods");
        if (fs.size() != model.schema.size()) throw ParseError("model: likelihood count mismatch");
        for (std::size_t j = 0; j < fs.size(); ++j) {
          NaiveBayesModel::Feature f;
          f.kind = model.schema.features()[j].kind;
          if (f.kind == ColumnKind::numeric) {
            const auto mean = fs[j].at("mean").get<std::vector<double>>();
            const auto var = fs[j].at("var").get<std::vector<double>>();
            for (int c = 0; c < 2; ++c) {
              f.mean[c] = mean.at(c);
              f.var[c] = var.at(c);
            }
          } else {
            const auto lp = fs[j].at("log_prob").get<std::vector<std::vector<double>>>();
            f.log_prob[0] = lp.at(0);
            f.log_prob[1] = lp.at(1);
          }
          m.features.push_back(std::move(f));
        }
        model.state = std::move(m);
        break;
      }
      case Algorithm::ann: {
        AnnModel m;
        m.shape.inputs = doc.at("inputs").get<std::size_t>();
        m.shape.hidden = doc.at("hidden").get<std::size_t>();
        m.center = doc.at("center").get<std::vector<double>>();
        m.scale = doc.at("scale").get<std::vector<double>>();
        m.params = doc.at("params").get<std::vector<double>>();
        m.final_loss = doc.at("final_loss").get<double>();
        if (m.params.size() != m.shape.size() || m.center.size() != m.shape.inputs ||
            m.shape.inputs != model.schema.encoded_width())
          throw ParseError("model: network dimensions are inconsistent");
        model.state = std::move(m);
        break;
      }
    }
    return model;
  } catch (const json::exception& e) {
    throw ParseError(std::string("model: ") + e.what());
  } catch (const DomainError& e) {
    throw ParseError(std::string("model: ") + e.what());
  }
}

void save_model(const TrainedClassifier& model, const std::filesystem::path& path) {
  write_file_atomic(path, to_json(model).dump() + "\n");
}

TrainedClassifier load_model(const std::filesystem::path& path) {
  const auto text = read_file(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  try {
    return classifier_from_json(doc);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace innosurv
