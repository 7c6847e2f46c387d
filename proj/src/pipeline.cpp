#include "innosurv/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <map>
#include <set>
#include <sstream>

#include "innosurv/cleansing.hpp"
#include "innosurv/evaluation.hpp"
#include "innosurv/io.hpp"
#include "innosurv/rng.hpp"
#include "innosurv/survival.hpp"
#include "innosurv/svg.hpp"

namespace innosurv {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Dataset files

fs::path schema_path_for(const fs::path& csv) {
  auto p = csv;
  p.replace_extension(".schema");
  return p;
}

Dataset load_dataset(const fs::path& csv, const CsvOptions& options) {
  const auto schema_path = schema_path_for(csv);
  if (!fs::exists(csv)) throw IoError("data file not found: " + csv.string());
  if (!fs::exists(schema_path)) throw IoError("schema sidecar not found: " + schema_path.string());
  return load_csv(csv, read_schema(schema_path), options);
}

void save_dataset(const Dataset& data, const fs::path& csv, const CsvOptions& options) {
  if (csv.has_parent_path()) fs::create_directories(csv.parent_path());
  std::ostringstream out;
  write_csv(data, out, options);
  write_file_atomic(csv, out.str());
  write_file_atomic(schema_path_for(csv), format_schema(data.schema()));
}

std::vector<std::string> row_ids(const Dataset& data) {
  std::vector<std::string> ids(data.n_rows());
  const auto id = data.role_column(ColumnRole::id);
  for (std::size_t r = 0; r < data.n_rows(); ++r) {
    if (!id) {
      ids[r] = std::to_string(r + 1);
    } else if (data.spec(*id).kind == ColumnKind::categorical) {
      ids[r] = data.level(r, *id);
    } else {
      ids[r] = format_number(data.cell(r, *id));
    }
  }
  return ids;
}

Dataset ensure_id_column(const Dataset& data) {
  if (data.role_column(ColumnRole::id)) return data;
  if (data.find("row_id")) throw DomainError("dataset has a 'row_id' column that is not marked as the id");
  ColumnSpec spec{"row_id", ColumnKind::categorical, ColumnRole::id, {}};
  std::vector<double> values(data.n_rows());
  for (std::size_t r = 0; r < data.n_rows(); ++r) {
    spec.vocabulary.push_back(std::to_string(r + 1));
    values[r] = static_cast<double>(r);
  }
  return data.with_column(std::move(spec), std::move(values));
}

// ---------------------------------------------------------------------------
// Stage helpers

Dataset survival_dataset(const Dataset& raw, const std::vector<std::string>& ids, const AbstentionResult& labels,
                         const std::string& indicator) {
  if (ids.size() != labels.labels.size()) throw DomainError("ids and labels differ in length");
  std::map<std::string, std::size_t> raw_row;
  const auto raw_ids = row_ids(raw);
  for (std::size_t r = 0; r < raw_ids.size(); ++r)
    if (!raw_row.emplace(raw_ids[r], r).second) throw DomainError("duplicate id '" + raw_ids[r] + "'");

  std::vector<std::size_t> rows;
  std::vector<double> predicted;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (labels.labels[i] == AbstentionLabel::unclassified) continue;
    const auto it = raw_row.find(ids[i]);
    if (it == raw_row.end()) throw DomainError("classified id '" + ids[i] + "' not found in the raw data");
    rows.push_back(it->second);
    predicted.push_back(labels.labels[i] == AbstentionLabel::inn ? 1.0 : 0.0);
  }
  const auto subset = raw.select_rows(rows);
  Schema schema = subset.schema();
  std::vector<std::vector<double>> columns;
  for (std::size_t c = 0; c < subset.n_cols(); ++c) {
    const auto col = subset.column(c);
    columns.emplace_back(col.begin(), col.end());
    if (schema[c].name == indicator) {
      schema[c].name = indicator + "_true";
      if (subset.find(schema[c].name)) throw DomainError("column '" + schema[c].name + "' already exists");
      if (schema[c].role == ColumnRole::label) schema[c].role = ColumnRole::feature;
    }
  }
  schema.push_back({indicator, ColumnKind::numeric, ColumnRole::feature, {}});
  columns.push_back(std::move(predicted));
  return Dataset(std::move(schema), std::move(columns));
}

ReferenceLevels resolve_references(const std::string& spec, const Dataset& data) {
  if (spec.empty() || spec == "auto") return {};
  if (spec == "standard") {
    ReferenceLevels refs;
    const std::pair<const char*, const char*> preset[] = {{"sector", "C"}, {"location", "MI"}};
    for (const auto& [col, level] : preset) {
      const auto c = data.find(col);
      if (!c || data.spec(*c).kind != ColumnKind::categorical) continue;
      const auto& vocab = data.spec(*c).vocabulary;
      if (std::find(vocab.begin(), vocab.end(), level) != vocab.end()) refs[col] = level;
    }
    return refs;
  }
  return parse_references(read_file(spec));
}

std::vector<std::string> split_formulas(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find(';', start);
    if (end == std::string::npos) end = text.size();
    auto item = text.substr(start, end - start);
    const auto first = item.find_first_not_of(" \t");
    const auto last = item.find_last_not_of(" \t");
    if (first != std::string::npos) out.push_back(item.substr(first, last - first + 1));
    start = end + 1;
  }
  return out;
}

std::vector<CoxModelResult> run_cox_models(const Dataset& data, const std::vector<std::string>& formulas,
                                           const ReferenceLevels& references, const CoxSuiteOptions& options) {
  std::vector<CoxModelResult> results;
  for (std::size_t m = 0; m < formulas.size(); ++m) {
    CoxModelResult r;
    r.label = "(" + std::to_string(m + 1) + ")";
    r.formula = formulas[m];
    try {
      r.design = build_design(data, formulas[m], references);
      r.n = r.design.n();
      const auto samples = survival_samples(data, r.design.rows);
      for (const auto& s : samples) r.events += static_cast<std::size_t>(s.event);
      r.flags = detect_separation(r.design, samples);
      if (options.screen && !r.flags.empty()) {
        std::vector<std::string> names;
        for (const auto& f : r.flags) names.push_back(f.column);
        r.design = drop_columns(r.design, names, "separation");
        if (r.design.p() == 0)
          throw SeparationError(names.front(), "every column of the model is separated: " + names.front());
      }
      auto fit = cox_fit(r.design, samples, options.fit);
      if (!fit.converged)
        throw NumericalError("no convergence after " + std::to_string(fit.iterations) + " iterations");
      r.tests = cox_tests(fit, r.design, samples);
      r.fit = std::move(fit);
    } catch (const SeparationError& e) {
      r.error = e.what();
      r.error_kind = "separation";
    } catch (const NumericalError& e) {
      r.error = e.what();
      r.error_kind = "numerical";
    } catch (const Error& e) {
      r.error = e.what();
      r.error_kind = "domain";
    }
    results.push_back(std::move(r));
  }
  return results;
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

std::string num(double v) { return format_number(v); }

std::vector<Algorithm> parse_algorithms(const std::vector<std::string>& names) {
  std::vector<Algorithm> out;
  for (const auto& n : names) {
    const auto a = parse_algorithm(n);
    if (std::find(out.begin(), out.end(), a) != out.end()) throw DomainError("algorithm '" + n + "' listed twice");
    out.push_back(a);
  }
  return out;
}

std::string join_algorithms(const std::vector<Algorithm>& algs) {
  std::string out;
  for (auto a : algs) out += (out.empty() ? "" : ",") + std::string(to_string(a));
  return out;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw DomainError("config: " + what);
}

constexpr const char* kDefaultModels = "inno; inno + sector; inno + location; inno*sector; inno*location";

}  // namespace

std::vector<std::string> PipelineConfig::known_keys() {
  return {"seed",
          "data.train", "data.predict", "data.separator",
          "output.dir",
          "run.resume",
          "synthetic.rows", "synthetic.predict_rows", "synthetic.numeric", "synthetic.categorical",
          "synthetic.minority", "synthetic.separation", "synthetic.hazard_ratio", "synthetic.horizon",
          "synthetic.baseline_hazard", "synthetic.missing_rate",
          "clean.enabled", "clean.threshold",
          "split.fraction",
          "smote.k", "smote.over", "smote.under",
          "train.algorithms",
          "tree.min_node_size", "tree.min_leaf_size", "tree.max_depth", "tree.cp",
          "ctree.alpha", "ctree.permutations",
          "bag.members",
          "logit.max_iterations",
          "nb.laplace",
          "ann.hidden", "ann.learning_rate", "ann.epochs", "ann.weight_decay",
          "mix.components", "mix.grid_step", "mix.cutoff_low", "mix.cutoff_high",
          "predict.indicator",
          "km.level", "km.horizon",
          "cox.ties", "cox.references", "cox.models", "cox.screen"};
}

PipelineConfig PipelineConfig::from_config(const Config& config) {
  const auto known = known_keys();
  for (const auto& [k, v] : config.entries())
    if (std::find(known.begin(), known.end(), k) == known.end()) throw ParseError("unknown config key '" + k + "'");

  PipelineConfig c;
  c.seed = config.get_u64("seed", 1);
  c.train_data = config.get_string("data.train", "");
  c.predict_data = config.get_string("data.predict", "");
  const auto sep = config.get_string("data.separator", ";");
  require(sep.size() == 1 || sep == "tab", "data.separator must be a single character or 'tab'");
  c.csv.separator = sep == "tab" ? '\t' : sep[0];
  c.output_dir = config.get_string("output.dir", "innosurv-run");
  c.resume = config.get_bool("run.resume", false);

  auto count = [&](const std::string& key, std::int64_t fallback, std::int64_t lo) {
    const auto v = config.get_int(key, fallback);
    require(v >= lo, key + " must be at least " + std::to_string(lo));
    return static_cast<std::size_t>(v);
  };
  auto unit = [&](const std::string& key, double fallback, bool open_lo, bool open_hi) {
    const double v = config.get_double(key, fallback);
    const bool ok = (open_lo ? v > 0.0 : v >= 0.0) && (open_hi ? v < 1.0 : v <= 1.0);
    require(ok, key + " out of range");
    return v;
  };

  auto& s = c.synthetic;
  s.n_rows = count("synthetic.rows", 10000, 10);
  c.synthetic_predict_rows = count("synthetic.predict_rows", static_cast<std::int64_t>(s.n_rows), 10);
  s.n_numeric = count("synthetic.numeric", 20, 1);
  s.n_categorical = count("synthetic.categorical", 2, 0);
  s.minority_fraction = config.get_double("synthetic.minority", 0.05);
  s.class_separation = config.get_double("synthetic.separation", 1.0);
  s.hazard_ratio_true = config.get_double("synthetic.hazard_ratio", 0.65);
  s.censoring_horizon = config.get_double("synthetic.horizon", 10.0);
  s.baseline_hazard = config.get_double("synthetic.baseline_hazard", 0.035);
  s.missing_rate = config.get_double("synthetic.missing_rate", 0.02);
  require(s.minority_fraction > 0.0 && s.minority_fraction < 0.5, "synthetic.minority must lie in (0, 0.5)");
  require(s.class_separation >= 0.0, "synthetic.separation must be nonnegative");
  require(s.hazard_ratio_true > 0.0, "synthetic.hazard_ratio must be positive");
  require(s.censoring_horizon > 0.0, "synthetic.horizon must be positive");
  require(s.baseline_hazard > 0.0, "synthetic.baseline_hazard must be positive");
  require(s.missing_rate >= 0.0 && s.missing_rate < 0.5, "synthetic.missing_rate must lie in [0, 0.5)");

  c.clean = config.get_bool("clean.enabled", true);
  c.mva_threshold = unit("clean.threshold", 0.30, false, false);
  c.split.train_fraction = unit("split.fraction", 0.8, true, true);
  c.split.seed = c.seed;
  c.smote.k = count("smote.k", 5, 1);
  c.smote.over_pct = static_cast<int>(count("smote.over", 200, 1));
  c.smote.under_pct = static_cast<int>(count("smote.under", 200, 0));
  c.smote.seed = c.seed;

  c.algorithms = parse_algorithms(config.get_list("train.algorithms", {"rpart", "tree", "ctree", "bag", "logit", "nb", "ann"}));
  require(!c.algorithms.empty(), "train.algorithms must not be empty");
  auto& cl = c.classifier;
  cl.seed = c.seed;
  cl.tree.min_node_size = count("tree.min_node_size", 20, 1);
  cl.tree.min_leaf_size = count("tree.min_leaf_size", 7, 1);
  cl.tree.max_depth = count("tree.max_depth", 30, 1);
  cl.tree.cp = config.get_double("tree.cp", 1e-4);
  require(cl.tree.cp >= 0.0, "tree.cp must be nonnegative");
  cl.ctree.alpha = unit("ctree.alpha", 0.05, true, true);
  cl.ctree.permutations = count("ctree.permutations", 999, 1);
  cl.bag.members = count("bag.members", 50, 1);
  cl.logit.max_iterations = count("logit.max_iterations", 50, 1);
  cl.nb.laplace = config.get_double("nb.laplace", 1.0);
  require(cl.nb.laplace >= 0.0, "nb.laplace must be nonnegative");
  cl.ann.hidden = count("ann.hidden", 8, 1);
  cl.ann.learning_rate = config.get_double("ann.learning_rate", cl.ann.learning_rate);
  cl.ann.epochs = count("ann.epochs", static_cast<std::int64_t>(cl.ann.epochs), 1);
  cl.ann.weight_decay = config.get_double("ann.weight_decay", 1e-4);
  require(cl.ann.learning_rate > 0.0, "ann.learning_rate must be positive");
  require(cl.ann.weight_decay >= 0.0, "ann.weight_decay must be nonnegative");

  const auto comps = config.get_list("mix.components", {"auto"});
  if (!(comps.size() == 1 && comps[0] == "auto")) {
    c.mix_components = parse_algorithms(comps);
    require(c.mix_components.size() == 2, "mix.components must name exactly two algorithms");
    for (auto a : c.mix_components)
      require(std::find(c.algorithms.begin(), c.algorithms.end(), a) != c.algorithms.end(),
              "mixture component '" + std::string(to_string(a)) + "' is not trained");
  }
  c.grid_step = config.get_double("mix.grid_step", 0.01);
  require(c.grid_step > 0.0 && c.grid_step <= 1.0, "mix.grid_step must lie in (0, 1]");
  c.cutoff_low = unit("mix.cutoff_low", 0.2, false, false);
  c.cutoff_high = unit("mix.cutoff_high", 0.8, false, false);
  require(c.cutoff_low < c.cutoff_high, "mix.cutoff_low must be below mix.cutoff_high");

  c.indicator = config.get_string("predict.indicator", "inno");
  require(!c.indicator.empty(), "predict.indicator must not be empty");
  c.km_level = unit("km.level", 0.95, true, true);
  c.km_horizon = config.get_double("km.horizon", s.censoring_horizon);
  require(c.km_horizon > 0.0, "km.horizon must be positive");
  c.cox.fit.ties = parse_ties(config.get_string("cox.ties", "efron"));
  c.cox.screen = config.get_bool("cox.screen", true);
  c.references = config.get_string("cox.references", "auto");
  c.cox_models = split_formulas(config.get_string("cox.models", kDefaultModels));
  require(!c.cox_models.empty(), "cox.models must list at least one formula");
  for (const auto& f : c.cox_models) parse_formula(f);

  auto& e = c.echo;
  e.set("seed", std::to_string(c.seed));
  e.set("data.train", c.train_data.string());
  e.set("data.predict", c.predict_data.string());
  e.set("data.separator", c.csv.separator == '\t' ? "tab" : std::string(1, c.csv.separator));
  e.set("synthetic.rows", std::to_string(s.n_rows));
  e.set("synthetic.predict_rows", std::to_string(c.synthetic_predict_rows));
  e.set("synthetic.numeric", std::to_string(s.n_numeric));
  e.set("synthetic.categorical", std::to_string(s.n_categorical));
  e.set("synthetic.minority", num(s.minority_fraction));
  e.set("synthetic.separation", num(s.class_separation));
  e.set("synthetic.hazard_ratio", num(s.hazard_ratio_true));
  e.set("synthetic.horizon", num(s.censoring_horizon));
  e.set("synthetic.baseline_hazard", num(s.baseline_hazard));
  e.set("synthetic.missing_rate", num(s.missing_rate));
  e.set("clean.enabled", c.clean ? "true" : "false");
  e.set("clean.threshold", num(c.mva_threshold));
  e.set("split.fraction", num(c.split.train_fraction));
  e.set("smote.k", std::to_string(c.smote.k));
  e.set("smote.over", std::to_string(c.smote.over_pct));
  e.set("smote.under", std::to_string(c.smote.under_pct));
  e.set("train.algorithms", join_algorithms(c.algorithms));
  e.set("tree.min_node_size", std::to_string(cl.tree.min_node_size));
  e.set("tree.min_leaf_size", std::to_string(cl.tree.min_leaf_size));
  e.set("tree.max_depth", std::to_string(cl.tree.max_depth));
  e.set("tree.cp", num(cl.tree.cp));
  e.set("ctree.alpha", num(cl.ctree.alpha));
  e.set("ctree.permutations", std::to_string(cl.ctree.permutations));
  e.set("bag.members", std::to_string(cl.bag.members));
  e.set("logit.max_iterations", std::to_string(cl.logit.max_iterations));
  e.set("nb.laplace", num(cl.nb.laplace));
  e.set("ann.hidden", std::to_string(cl.ann.hidden));
  e.set("ann.learning_rate", num(cl.ann.learning_rate));
  e.set("ann.epochs", std::to_string(cl.ann.epochs));
  e.set("ann.weight_decay", num(cl.ann.weight_decay));
  e.set("mix.components", c.mix_components.empty() ? "auto" : join_algorithms(c.mix_components));
  e.set("mix.grid_step", num(c.grid_step));
  e.set("mix.cutoff_low", num(c.cutoff_low));
  e.set("mix.cutoff_high", num(c.cutoff_high));
  e.set("predict.indicator", c.indicator);
  e.set("km.level", num(c.km_level));
  e.set("km.horizon", num(c.km_horizon));
  e.set("cox.ties", std::string(to_string(c.cox.fit.ties)));
  e.set("cox.screen", c.cox.screen ? "true" : "false");
  e.set("cox.references", c.references);
  std::string models;
  for (const auto& f : c.cox_models) models += (models.empty() ? "" : "; ") + f;
  e.set("cox.models", models);
  return c;
}

// ---------------------------------------------------------------------------
// Stages shared with the single-stage subcommands

namespace {

std::string group_name(int code) { return code == 1 ? "INN" : "NOINN"; }

PlotSeries roc_series(const std::string& name, const RocCurve& roc) {
  PlotSeries s{name, {}};
  for (const auto& p : roc.points) s.points.emplace_back(p.fpr, p.tpr);
  return s;
}

}  // namespace

ModelScores evaluate_models(const ModelSet& models, const Dataset& test, const fs::path& out) {
  if (models.empty()) throw DomainError("no models to evaluate");
  ModelScores result;
  result.labels = binary_labels(test);
  json algorithms = json::object();
  std::vector<std::pair<double, Algorithm>> ranking;
  for (const auto& [a, model] : models) {
    auto scores = predict_proba(*model, test);
    const auto evaluation = evaluate_scores(scores, result.labels);
    write_file_atomic(out / ("roc_" + std::string(to_string(a)) + ".csv"), roc_csv(evaluation.roc));
    algorithms[std::string(to_string(a))] = to_json(evaluation);
    ranking.emplace_back(evaluation.roc.auc, a);
    result.scores[a] = std::move(scores);
  }
  std::stable_sort(ranking.begin(), ranking.end(), [](const auto& x, const auto& y) {
    if (x.first != y.first) return x.first > y.first;
    return static_cast<int>(x.second) < static_cast<int>(y.second);
  });
  json order = json::array();
  for (const auto& r : ranking) order.push_back(std::string(to_string(r.second)));
  result.section = {{"test_rows", test.n_rows()}, {"algorithms", std::move(algorithms)}, {"ranking", std::move(order)}};
  return result;
}

json mixture_to_json(const MixtureModel& m) {
  m.validate();
  return {{"format", "innosurv-mixture"},
          {"version", 1},
          {"alpha", m.alpha},
          {"cutoff_low", m.cutoff_low},
          {"cutoff_high", m.cutoff_high},
          {"components",
           {{{"algorithm", std::string(to_string(m.component_a->algorithm))}, {"model", to_json(*m.component_a)}},
            {{"algorithm", std::string(to_string(m.component_b->algorithm))}, {"model", to_json(*m.component_b)}}}}};
}

MixtureModel mixture_from_json(const json& doc) {
  try {
    if (doc.at("format") != "innosurv-mixture") throw ParseError("not a mixture file");
    if (doc.at("version") != 1) throw ParseError("unsupported mixture version");
    const auto& comps = doc.at("components");
    if (!comps.is_array() || comps.size() != 2) throw ParseError("a mixture has exactly two components");
    MixtureModel m;
    m.alpha = doc.at("alpha").get<double>();
    m.cutoff_low = doc.at("cutoff_low").get<double>();
    m.cutoff_high = doc.at("cutoff_high").get<double>();
    m.component_a = std::make_shared<const TrainedClassifier>(classifier_from_json(comps[0].at("model")));
    m.component_b = std::make_shared<const TrainedClassifier>(classifier_from_json(comps[1].at("model")));
    if (!(m.component_a->schema == m.component_b->schema))
      throw ParseError("mixture components were trained on different features");
    m.validate();
    return m;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed mixture file: ") + e.what());
  }
}

MixtureModel load_mixture(const fs::path& path) {
  try {
    return mixture_from_json(json::parse(read_file(path)));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

json mix_stage(MixtureModel& mixture, const std::vector<double>& scores_a, const std::vector<double>& scores_b,
               const std::vector<int>& labels, double grid_step,
               const std::map<std::string, std::vector<double>>& other_scores, const fs::path& out) {
  const auto search = optimize_weight(scores_a, scores_b, labels, grid_step);
  mixture.alpha = search.alpha;
  mixture.validate();
  const auto mixed = mix_scores(scores_a, scores_b, search.alpha);
  const auto roc = roc_curve(mixed, labels);
  write_file_atomic(out / "roc.csv", roc_csv(roc));

  std::vector<PlotSeries> series;
  for (const auto& [name, scores] : other_scores) series.push_back(roc_series(name, roc_curve(scores, labels)));
  series.push_back(roc_series("mixture", roc));
  render_svg(series, PlotKind::line, out / "roc.svg", {"ROC curves (test set)", "false positive rate", "true positive rate"});

  json section = to_json(search);
  section["components"] = {std::string(to_string(mixture.component_a->algorithm)),
                           std::string(to_string(mixture.component_b->algorithm))};
  section["auc"] = roc.auc;
  section["component_auc"] = {roc_curve(scores_a, labels).auc, roc_curve(scores_b, labels).auc};
  section["separation"] = separation_score(mixed, labels);
  section["cutoff_low"] = mixture.cutoff_low;
  section["cutoff_high"] = mixture.cutoff_high;

  json file = mixture_to_json(mixture);
  file["trace"] = section["trace"];
  file["auc"] = roc.auc;
  write_file_atomic(out / "mixture.json", dump_json(file));
  return section;
}

PredictOutput predict_stage(const MixtureModel& mixture, const Dataset& clean, const Dataset& raw,
                            const std::string& indicator, const fs::path& out) {
  Warnings warnings;
  const auto probabilities = predict_mixture(mixture, clean, &warnings);
  const auto labels = classify_probabilities(probabilities, mixture.cutoff_low, mixture.cutoff_high);
  const auto ids = row_ids(clean);
  write_file_atomic(out / "labels.csv", labels_csv(ids, probabilities, labels));
  json section = to_json(labels);
  section["warnings"] = warnings;

  // Agreement with a known label, when the predict era carries one.
  if (const auto label = clean.role_column(ColumnRole::label)) {
    ConfusionMatrix m;
    for (std::size_t r = 0; r < labels.labels.size(); ++r) {
      if (labels.labels[r] == AbstentionLabel::unclassified || clean.missing(r, *label)) continue;
      const bool predicted = labels.labels[r] == AbstentionLabel::inn;
      const bool actual = clean.cell(r, *label) == 1.0;
      if (actual)
        (predicted ? m.tp : m.fn)++;
      else
        (predicted ? m.fp : m.tn)++;
    }
    section["agreement"] = to_json(m);
  } else {
    section["agreement"] = nullptr;
  }

  // Numeric feature means of the two predicted groups, compared by Welch tests.
  json welch = json::object();
  if (labels.count(AbstentionLabel::inn) >= 2 && labels.count(AbstentionLabel::noinn) >= 2) {
    for (std::size_t c = 0; c < clean.n_cols(); ++c) {
      const auto& spec = clean.spec(c);
      if (spec.role != ColumnRole::feature || spec.kind != ColumnKind::numeric) continue;
      std::vector<double> inn, noinn;
      for (std::size_t r = 0; r < labels.labels.size(); ++r) {
        if (clean.missing(r, c)) continue;
        if (labels.labels[r] == AbstentionLabel::inn) inn.push_back(clean.cell(r, c));
        if (labels.labels[r] == AbstentionLabel::noinn) noinn.push_back(clean.cell(r, c));
      }
      if (inn.size() < 2 || noinn.size() < 2) continue;
      Warnings w;
      welch[spec.name] = to_json(welch_t_test(inn, noinn, &w));
    }
  }
  section["welch"] = std::move(welch);

  PredictOutput result;
  result.survival = survival_dataset(raw, ids, labels, indicator);
  section["survival_rows"] = result.survival.n_rows();
  result.section = std::move(section);
  return result;
}

json km_stage(const Dataset& survival, const std::string& group, double level, double horizon, const fs::path& out) {
  const auto samples = survival_samples(survival, group);
  const auto curves = km_by_group(samples, level);
  std::map<std::string, KMCurve> named;
  json groups = json::object();
  std::vector<PlotSeries> series;
  for (const auto& [code, curve] : curves) {
    if (code != 0 && code != 1) throw DomainError("group column '" + group + "' must be coded 0/1");
    const auto name = group_name(code);
    named[name] = curve;
    const auto at = km_at(curve, horizon);
    std::size_t events = 0;
    for (auto d : curve.deaths) events += d;
    groups[name] = {{"n", curve.n},
                    {"events", events},
                    {"distinct_event_times", curve.size()},
                    {"survival_at_horizon", at.survival},
                    {"sd_at_horizon", at.variance_defined ? json(std::sqrt(at.variance)) : json(nullptr)},
                    {"ci_at_horizon", at.ci_defined ? json({at.ci_lower, at.ci_upper}) : json(nullptr)}};
    PlotSeries s{name, {{0.0, 1.0}}};
    for (std::size_t i = 0; i < curve.size(); ++i) s.points.emplace_back(curve.times[i], curve.survival[i]);
    series.push_back(std::move(s));
  }
  write_file_atomic(out / "km.csv", km_csv(named));
  render_svg(series, PlotKind::step, out / "km.svg", {"Kaplan-Meier survival by predicted label", "years", "survival"});
  json section = {{"horizon", horizon}, {"confidence_level", level}, {"groups", std::move(groups)}};
  section["logrank"] = curves.size() == 2 ? to_json(logrank_test(samples)) : json(nullptr);
  write_file_atomic(out / "logrank.json", dump_json(section["logrank"]));
  return section;
}

json cox_stage(const Dataset& survival, const std::vector<std::string>& formulas, const std::string& references,
               const CoxSuiteOptions& options, const fs::path& out, std::vector<CoxModelResult>* results) {
  const auto refs = resolve_references(references, survival);
  auto models = run_cox_models(survival, formulas, refs, options);
  json list = json::array();
  for (const auto& m : models) list.push_back(to_json(m));
  json section = {{"ties", std::string(to_string(options.fit.ties))},
                  {"screen", options.screen},
                  {"references", references},
                  {"models", std::move(list)}};
  write_file_atomic(out / "cox.json", dump_json(section));
  write_file_atomic(out / "cox.txt", cox_summary_table(models));
  if (results) *results = std::move(models);
  return section;
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

const char* const kStages[] = {"data", "clean", "split", "smote", "train", "evaluate", "mix", "predict", "km", "cox"};

double positive_fraction(const Dataset& d) {
  const auto label = d.role_column(ColumnRole::label);
  if (!label || d.n_rows() == 0) return std::numeric_limits<double>::quiet_NaN();
  double pos = 0.0;
  std::size_t n = 0;
  for (std::size_t r = 0; r < d.n_rows(); ++r)
    if (!d.missing(r, *label)) {
      pos += d.cell(r, *label);
      ++n;
    }
  return n ? pos / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

struct State {
  Dataset raw_train, raw_predict;
  Dataset clean_train, clean_predict;
  Dataset train, test;
  Dataset balanced;
  ModelSet models;
  ModelScores evaluation;
  MixtureModel mixture;
  Dataset survival;
};

}  // namespace

json deterministic_view(const json& report) {
  json copy = report;
  copy.erase("timing");
  return copy;
}

PipelineOutcome run_pipeline(const PipelineConfig& config) {
  const fs::path out = config.output_dir;
  const fs::path stages_dir = out / "stages";
  fs::create_directories(stages_dir / "models");

  PipelineOutcome outcome;
  json report = {{"schema_version", kReportSchemaVersion},
                 {"tool", {{"name", "innosurv"}, {"version", kToolVersion}}},
                 {"seed", config.seed},
                 {"config", config.echo.entries()},
                 {"status", "ok"},
                 {"failed_stage", nullptr},
                 {"error", nullptr},
                 {"timing", json::object()},
                 {"stages", json::object()}};
  for (const char* s : kStages) report["stages"][s] = nullptr;

  // Resumable stages leave their data under stages/ and their report section
  // in stages/<name>.json, guarded by a fingerprint of the effective config.
  Config fingerprint_source = config.echo;
  fingerprint_source.set("run.resume", "");
  const auto fingerprint = std::to_string(hash_tag(fingerprint_source.format()));
  const auto manifest_path = stages_dir / "manifest.json";
  std::set<std::string> completed;
  if (config.resume && fs::exists(manifest_path)) {
    try {
      const auto manifest = json::parse(read_file(manifest_path));
      if (manifest.at("fingerprint") == fingerprint)
        for (const auto& s : manifest.at("completed")) completed.insert(s.get<std::string>());
    } catch (const json::exception&) {
      completed.clear();
    }
  }
  // A recomputed stage invalidates every cached stage after it.
  auto mark_completed = [&](const std::string& stage) {
    bool after = false;
    for (const char* s : kStages) {
      if (after) completed.erase(s);
      if (stage == s) after = true;
    }
    completed.insert(stage);
    json manifest = {{"fingerprint", fingerprint}, {"completed", completed}};
    write_file_atomic(manifest_path, dump_json(manifest));
  };

  State st;
  const auto& csv = config.csv;
  auto stage_file = [&](const std::string& name) { return stages_dir / name; };

  // Loads a stage when it is resumable and cached, computes it otherwise.
  auto run_stage = [&](const std::string& name, auto compute, auto load) {
    const auto start = std::chrono::steady_clock::now();
    json section;
    const auto cached = stage_file(name + ".json");
    if (completed.count(name) && fs::exists(cached)) {
      load();
      section = json::parse(read_file(cached));
    } else {
      section = compute();
      write_file_atomic(cached, dump_json(section));
      mark_completed(name);
    }
    report["stages"][name] = section;
    report["timing"][name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  // Stages after train are cheap and always recomputed.
  auto run_fresh = [&](const std::string& name, auto compute) {
    const auto start = std::chrono::steady_clock::now();
    report["stages"][name] = compute();
    report["timing"][name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  std::string current;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    current = "data";
    run_stage(
        "data",
        [&] {
          json section;
          if (config.train_data.empty()) {
            auto spec = config.synthetic;
            spec.seed = substream_seed(config.seed, "synthetic.train");
            st.raw_train = generate_synthetic(spec);
            spec.n_rows = config.synthetic_predict_rows;
            spec.seed = substream_seed(config.seed, "synthetic.predict");
            st.raw_predict = generate_synthetic(spec);
            section["source"] = "synthetic";
          } else {
            if (config.predict_data.empty()) throw DomainError("data.predict is required when data.train is given");
            st.raw_train = load_dataset(config.train_data, csv);
            st.raw_predict = load_dataset(config.predict_data, csv);
            section["source"] = "files";
          }
          if (!st.raw_train.role_column(ColumnRole::label)) throw DomainError("training data has no label column");
          st.raw_train = ensure_id_column(st.raw_train);
          st.raw_predict = ensure_id_column(st.raw_predict);
          save_dataset(st.raw_train, stage_file("train_raw.csv"), csv);
          save_dataset(st.raw_predict, stage_file("predict_raw.csv"), csv);
          section["train_rows"] = st.raw_train.n_rows();
          section["train_columns"] = st.raw_train.n_cols();
          section["predict_rows"] = st.raw_predict.n_rows();
          section["predict_columns"] = st.raw_predict.n_cols();
          section["train_positive_fraction"] = number_or_null(positive_fraction(st.raw_train));
          return section;
        },
        [&] {
          st.raw_train = load_dataset(stage_file("train_raw.csv"), csv);
          st.raw_predict = load_dataset(stage_file("predict_raw.csv"), csv);
        });

    current = "clean";
    run_stage(
        "clean",
        [&] {
          json section;
          if (config.clean) {
            auto result = run_mva(st.raw_train, st.raw_predict, config.mva_threshold);
            st.clean_train = std::move(result.primary);
            st.clean_predict = std::move(*result.secondary);
            section = to_json(result.report);
          } else {
            st.clean_train = drop_incomplete_rows(st.raw_train).data;
            st.clean_predict = drop_incomplete_rows(st.raw_predict).data;
            section["skipped"] = true;
          }
          if (st.clean_train.n_rows() == 0 || st.clean_predict.n_rows() == 0)
            throw DomainError("cleansing left no complete rows");
          save_dataset(st.clean_train, stage_file("clean_train.csv"), csv);
          save_dataset(st.clean_predict, stage_file("clean_predict.csv"), csv);
          section["train_rows"] = st.clean_train.n_rows();
          section["predict_rows"] = st.clean_predict.n_rows();
          section["train_positive_fraction"] = number_or_null(positive_fraction(st.clean_train));
          return section;
        },
        [&] {
          st.clean_train = load_dataset(stage_file("clean_train.csv"), csv);
          st.clean_predict = load_dataset(stage_file("clean_predict.csv"), csv);
        });

    current = "split";
    run_stage(
        "split",
        [&] {
          auto parts = split(st.clean_train, config.split);
          st.train = std::move(parts.train);
          st.test = std::move(parts.test);
          save_dataset(st.train, stage_file("split_train.csv"), csv);
          save_dataset(st.test, stage_file("split_test.csv"), csv);
          return json{{"train_rows", st.train.n_rows()},
                      {"test_rows", st.test.n_rows()},
                      {"train_positive_fraction", number_or_null(positive_fraction(st.train))},
                      {"test_positive_fraction", number_or_null(positive_fraction(st.test))}};
        },
        [&] {
          st.train = load_dataset(stage_file("split_train.csv"), csv);
          st.test = load_dataset(stage_file("split_test.csv"), csv);
        });

    current = "smote";
    run_stage(
        "smote",
        [&] {
          auto result = smote(st.train, config.smote);
          st.balanced = std::move(result.data);
          save_dataset(st.balanced, stage_file("smote_train.csv"), csv);
          return json{{"rows_before", st.train.n_rows()},
                      {"rows_after", st.balanced.n_rows()},
                      {"class_ratio_before", number_or_null(positive_fraction(st.train))},
                      {"class_ratio_after", number_or_null(positive_fraction(st.balanced))},
                      {"minority_label", result.minority_label},
                      {"minority_rows", result.n_minority},
                      {"majority_kept", result.n_majority_kept},
                      {"synthetic_rows", result.origins.size()}};
        },
        [&] { st.balanced = load_dataset(stage_file("smote_train.csv"), csv); });

    current = "train";
    run_stage(
        "train",
        [&] {
          std::vector<std::pair<Algorithm, std::future<TrainedClassifier>>> jobs;
          for (auto a : config.algorithms) {
            auto spec = config.classifier;
            spec.algorithm = a;
            jobs.emplace_back(a, std::async(std::launch::async, [spec, &st] { return fit_classifier(st.balanced, spec); }));
          }
          json algorithms = json::object();
          for (auto& [a, job] : jobs) {
            const std::string name(to_string(a));
            const auto file = fs::path("stages") / "models" / (name + ".json");
            try {
              auto model = std::make_shared<const TrainedClassifier>(job.get());
              save_model(*model, out / file);
              st.models[a] = std::move(model);
              algorithms[name] = {{"status", "ok"}, {"model", file.generic_string()}, {"error", nullptr}};
            } catch (const Error& e) {
              algorithms[name] = {{"status", "failed"}, {"model", nullptr}, {"error", e.what()}};
            }
          }
          if (st.models.empty()) throw NumericalError("every classifier failed to train");
          return json{{"rows", st.balanced.n_rows()}, {"algorithms", std::move(algorithms)}};
        },
        [&] {
          const auto section = json::parse(read_file(stage_file("train.json")));
          for (auto a : config.algorithms) {
            const auto& entry = section.at("algorithms").at(std::string(to_string(a)));
            if (entry.at("status") == "ok")
              st.models[a] = std::make_shared<const TrainedClassifier>(load_model(out / entry.at("model").get<std::string>()));
          }
        });

    current = "evaluate";
    run_fresh("evaluate", [&] {
      st.evaluation = evaluate_models(st.models, st.test, out);
      write_file_atomic(out / "metrics.json", dump_json(st.evaluation.section));
      return st.evaluation.section;
    });

    current = "mix";
    run_fresh("mix", [&] {
      std::vector<Algorithm> comps = config.mix_components;
      std::string selection = "configured";
      if (comps.empty()) {
        selection = "top-2 test AUC";
        for (const auto& name : st.evaluation.section["ranking"]) {
          if (comps.size() == 2) break;
          comps.push_back(parse_algorithm(name.get<std::string>()));
        }
      }
      if (comps.size() != 2) throw DomainError("a mixture needs two trained classifiers");
      for (auto a : comps)
        if (!st.models.count(a)) throw DomainError("mixture component '" + std::string(to_string(a)) + "' failed to train");
      st.mixture.component_a = st.models[comps[0]];
      st.mixture.component_b = st.models[comps[1]];
      st.mixture.cutoff_low = config.cutoff_low;
      st.mixture.cutoff_high = config.cutoff_high;
      std::map<std::string, std::vector<double>> others;
      for (const auto& [a, s] : st.evaluation.scores) others[std::string(to_string(a))] = s;
      auto section = mix_stage(st.mixture, st.evaluation.scores[comps[0]], st.evaluation.scores[comps[1]],
                               st.evaluation.labels, config.grid_step, others, out);
      section["selection"] = selection;
      return section;
    });

    current = "predict";
    run_fresh("predict", [&] {
      auto result = predict_stage(st.mixture, st.clean_predict, st.raw_predict, config.indicator, out);
      st.survival = std::move(result.survival);
      save_dataset(st.survival, stage_file("survival.csv"), csv);
      return result.section;
    });

    current = "km";
    run_fresh("km", [&] { return km_stage(st.survival, config.indicator, config.km_level, config.km_horizon, out); });

    current = "cox";
    run_fresh("cox", [&] { return cox_stage(st.survival, config.cox_models, config.references, config.cox, out); });
  } catch (...) {
    outcome.failed_stage = current;
    outcome.error = std::current_exception();
    report["status"] = "failed";
    report["failed_stage"] = current;
    try {
      throw;
    } catch (const std::exception& e) {
      report["error"] = e.what();
    } catch (...) {
      report["error"] = "unknown error";
    }
  }
  report["timing"]["total"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_file_atomic(out / "config.echo", config.echo.format());
  write_file_atomic(out / "report.json", dump_json(report));
  outcome.report = std::move(report);
  return outcome;
}

}  // namespace innosurv
