#include "innosurv/cli.hpp"

#include <filesystem>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "innosurv/cleansing.hpp"
#include "innosurv/errors.hpp"
#include "innosurv/io.hpp"
#include "innosurv/pipeline.hpp"
#include "innosurv/rng.hpp"

namespace innosurv {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Settings reach a subcommand in three layers, later ones winning: the
// --config file, --set assignments, then dedicated flags.
struct Settings {
  std::string config_file;
  std::vector<std::string> assignments;
  Config flags;

  Config resolve() const {
    Config c = config_file.empty() ? Config{} : Config::load(config_file);
    for (const auto& a : assignments) c.set_assignment(a);
    c.merge(flags);
    return c;
  }
};

void add_settings(CLI::App* cmd, Settings& s) {
  cmd->add_option("--config", s.config_file, "Sectioned key = value configuration file");
  cmd->add_option("--set", s.assignments, "Override one setting, as section.key=value (repeatable)");
}

// A flag that writes its text into a configuration key.
void bind(CLI::App* cmd, Settings& s, const std::string& flag, const std::string& key, const std::string& help) {
  cmd->add_option_function<std::string>(
      flag, [&s, key](const std::string& v) { s.flags.set(key, v); }, help + " [" + key + "]");
}

void bind_switch(CLI::App* cmd, Settings& s, const std::string& flag, const std::string& key, const std::string& value,
                 const std::string& help) {
  cmd->add_flag_callback(flag, [&s, key, value] { s.flags.set(key, value); }, help);
}

fs::path prepare_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
  return dir;
}

ModelSet load_models(const std::vector<std::string>& paths) {
  ModelSet models;
  for (const auto& p : paths) {
    auto m = std::make_shared<const TrainedClassifier>(load_model(p));
    const auto a = m->algorithm;
    if (!models.emplace(a, std::move(m)).second)
      throw DomainError("two models of algorithm '" + std::string(to_string(a)) + "' given");
  }
  return models;
}

std::string percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * fraction);
  return buf;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Innovation labelling and firm survival analysis"};
  app.name("innosurv");
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  Settings s;
  std::string data, predict, raw, out_path, out_dir = ".", mixture_path, era = "train", group;
  std::vector<std::string> models, formulas, algos;
  std::function<int()> action;

  auto common = [&](CLI::App* cmd) {
    add_settings(cmd, s);
    bind(cmd, s, "--seed", "seed", "Master seed");
    bind(cmd, s, "--separator", "data.separator", "CSV field separator (one character or 'tab')");
  };
  auto effective = [&] { return PipelineConfig::from_config(s.resolve()); };

  // simulate ------------------------------------------------------------------
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic dataset with a planted label effect");
  common(simulate);
  simulate->add_option("--out", out_path, "Output CSV; the schema is written alongside")->required();
  simulate->add_option("--era", era, "Substream: train or predict")->check(CLI::IsMember({"train", "predict"}));
  bind(simulate, s, "--rows", "synthetic.rows", "Rows");
  bind(simulate, s, "--numeric", "synthetic.numeric", "Numeric features");
  bind(simulate, s, "--categorical", "synthetic.categorical", "Categorical features");
  bind(simulate, s, "--minority", "synthetic.minority", "Label-1 fraction");
  bind(simulate, s, "--separation", "synthetic.separation", "Mean shift of informative features");
  bind(simulate, s, "--hazard-ratio", "synthetic.hazard_ratio", "Planted hazard ratio of label 1");
  bind(simulate, s, "--horizon", "synthetic.horizon", "Censoring horizon in years");
  bind(simulate, s, "--baseline-hazard", "synthetic.baseline_hazard", "Exit rate of label 0 per year");
  bind(simulate, s, "--missing-rate", "synthetic.missing_rate", "Average missing-cell probability");
  simulate->callback([&] {
    action = [&] {
      const auto c = effective();
      auto spec = c.synthetic;
      if (era == "predict") spec.n_rows = c.synthetic_predict_rows;
      spec.seed = substream_seed(c.seed, era == "train" ? "synthetic.train" : "synthetic.predict");
      const auto d = generate_synthetic(spec);
      save_dataset(d, out_path, c.csv);
      out << "wrote " << out_path << " (" << d.n_rows() << " rows, " << d.n_cols() << " columns)\n";
      return kExitOk;
    };
  });

  // clean ---------------------------------------------------------------------
  auto* clean = app.add_subcommand("clean", "Missing-value analysis and harmonisation of two eras");
  common(clean);
  clean->add_option("--data", data, "Training-era CSV")->required();
  clean->add_option("--predict", predict, "Predict-era CSV, harmonised with the training era");
  clean->add_option("--out-dir", out_dir, "Output directory");
  bind(clean, s, "--threshold", "clean.threshold", "Maximum NA fraction of a kept column");
  clean->callback([&] {
    action = [&] {
      const auto c = effective();
      const auto dir = prepare_dir(out_dir);
      const auto primary = ensure_id_column(load_dataset(data, c.csv));
      std::optional<Dataset> secondary;
      if (!predict.empty()) secondary = ensure_id_column(load_dataset(predict, c.csv));
      auto result = run_mva(primary, secondary, c.mva_threshold);
      save_dataset(result.primary, dir / "clean_train.csv", c.csv);
      if (result.secondary) save_dataset(*result.secondary, dir / "clean_predict.csv", c.csv);
      write_file_atomic(dir / "mva.json", dump_json(to_json(result.report)));
      out << "rows " << primary.n_rows() << " -> " << result.primary.n_rows() << ", columns " << primary.n_cols()
          << " -> " << result.primary.n_cols() << "; report " << (dir / "mva.json").string() << "\n";
      for (const auto& w : result.report.warnings) err << "warning: " << w << "\n";
      return kExitOk;
    };
  });

  // split ---------------------------------------------------------------------
  auto* split_cmd = app.add_subcommand("split", "Seeded random train/test split");
  common(split_cmd);
  split_cmd->add_option("--data", data, "Input CSV")->required();
  split_cmd->add_option("--out-dir", out_dir, "Output directory (train.csv, test.csv)");
  bind(split_cmd, s, "--train-fraction", "split.fraction", "Training fraction");
  split_cmd->callback([&] {
    action = [&] {
      const auto c = effective();
      const auto dir = prepare_dir(out_dir);
      const auto parts = split(load_dataset(data, c.csv), c.split);
      save_dataset(parts.train, dir / "train.csv", c.csv);
      save_dataset(parts.test, dir / "test.csv", c.csv);
      out << "train " << parts.train.n_rows() << " rows, test " << parts.test.n_rows() << " rows\n";
      return kExitOk;
    };
  });

  // smote ---------------------------------------------------------------------
  auto* smote_cmd = app.add_subcommand("smote", "Oversample the minority class of a training partition");
  common(smote_cmd);
  smote_cmd->add_option("--data", data, "Training partition CSV")->required();
  smote_cmd->add_option("--out", out_path, "Output CSV")->required();
  bind(smote_cmd, s, "--smote-k", "smote.k", "Nearest minority neighbours");
  bind(smote_cmd, s, "--smote-over", "smote.over", "Synthetic rows as a percentage of the minority");
  bind(smote_cmd, s, "--smote-under", "smote.under", "Kept majority rows as a percentage of the synthetic rows");
  smote_cmd->callback([&] {
    action = [&] {
      const auto c = effective();
      const auto result = smote(load_dataset(data, c.csv), c.smote);
      save_dataset(result.data, out_path, c.csv);
      out << "minority " << result.n_minority << ", synthetic " << result.origins.size() << ", majority kept "
          << result.n_majority_kept << " -> " << result.data.n_rows() << " rows\n";
      return kExitOk;
    };
  });

  // train ---------------------------------------------------------------------
  auto* train = app.add_subcommand("train", "Fit classifiers and save them as JSON models");
  common(train);
  train->add_option("--data", data, "Balanced training CSV")->required();
  train->add_option("--algo", algos, "Algorithm (repeatable; default every algorithm in train.algorithms)");
  train->add_option("--out", out_path, "Model file (exactly one --algo)");
  train->add_option("--out-dir", out_dir, "Directory for <algorithm>.json when --out is not given");
  train->callback([&] {
    action = [&] {
      auto c = effective();
      if (!algos.empty()) {
        c.algorithms.clear();
        for (const auto& a : algos) c.algorithms.push_back(parse_algorithm(a));
      }
      if (!out_path.empty() && c.algorithms.size() != 1) throw DomainError("--out needs exactly one --algo");
      const auto d = load_dataset(data, c.csv);
      int status = kExitOk;
      for (auto a : c.algorithms) {
        auto spec = c.classifier;
        spec.algorithm = a;
        const auto path = out_path.empty() ? prepare_dir(out_dir) / (std::string(to_string(a)) + ".json") : fs::path(out_path);
        try {
          save_model(fit_classifier(d, spec), path);
          out << to_string(a) << ": " << path.string() << "\n";
        } catch (const NumericalError& e) {
          if (c.algorithms.size() == 1) throw;
          err << to_string(a) << ": failed: " << e.what() << "\n";
          status = kExitNumerical;
        }
      }
      return status;
    };
  });

  // evaluate ------------------------------------------------------------------
  auto* evaluate = app.add_subcommand("evaluate", "ROC curves, AUC and optimal cutoffs on a labelled test set");
  common(evaluate);
  evaluate->add_option("--data", data, "Labelled test CSV")->required();
  evaluate->add_option("--model", models, "Model file (repeatable)")->required();
  evaluate->add_option("--out-dir", out_dir, "Output directory (roc.csv, metrics.json)");
  evaluate->callback([&] {
    action = [&] {
      const auto c = effective();
      const auto dir = prepare_dir(out_dir);
      const auto result = evaluate_models(load_models(models), load_dataset(data, c.csv), dir);
      // roc.csv holds the best model's curve.
      const auto best = result.section["ranking"][0].get<std::string>();
      fs::copy_file(dir / ("roc_" + best + ".csv"), dir / "roc.csv", fs::copy_options::overwrite_existing);
      write_file_atomic(dir / "metrics.json", dump_json(result.section));
      for (const auto& name : result.section["ranking"]) {
        const auto& a = result.section["algorithms"][name.get<std::string>()];
        out << name.get<std::string>() << ": AUC " << a["auc"].get<double>() << "\n";
      }
      return kExitOk;
    };
  });

  // mix -----------------------------------------------------------------------
  auto* mix = app.add_subcommand("mix", "Weight two classifiers and label with an abstention band");
  common(mix);
  mix->add_option("--data", data, "Labelled test CSV used to choose the weight")->required();
  mix->add_option("--model", models,
                  "Model files (repeatable); two are used in the given order, more are ranked by test AUC")
      ->required();
  mix->add_option("--predict", predict, "CSV to label (default: the test CSV)");
  mix->add_option("--out-dir", out_dir, "Output directory (mixture.json, labels.csv, roc.csv)");
  bind(mix, s, "--alpha-grid-step", "mix.grid_step", "Weight grid step");
  bind(mix, s, "--cutoff-low", "mix.cutoff_low", "Probabilities below are NOINN");
  bind(mix, s, "--cutoff-high", "mix.cutoff_high", "Probabilities above are INN");
  mix->callback([&] {
    action = [&] {
      const auto c = effective();
      const auto dir = prepare_dir(out_dir);
      if (models.size() < 2) throw DomainError("mix needs at least two --model files");
      std::vector<std::shared_ptr<const TrainedClassifier>> given;
      for (const auto& p : models) given.push_back(std::make_shared<const TrainedClassifier>(load_model(p)));
      const auto test = load_dataset(data, c.csv);
      const auto labels = binary_labels(test);
      std::map<std::string, std::vector<double>> scores;
      std::vector<std::pair<double, std::size_t>> ranking;
      for (std::size_t i = 0; i < given.size(); ++i) {
        const std::string name(to_string(given[i]->algorithm));
        if (scores.count(name)) throw DomainError("two models of algorithm '" + name + "' given");
        scores[name] = predict_proba(*given[i], test);
        ranking.emplace_back(roc_curve(scores[name], labels).auc, i);
      }
      if (given.size() > 2) {
        std::stable_sort(ranking.begin(), ranking.end(), [&](const auto& x, const auto& y) {
          if (x.first != y.first) return x.first > y.first;
          return static_cast<int>(given[x.second]->algorithm) < static_cast<int>(given[y.second]->algorithm);
        });
      }
      MixtureModel m;
      m.component_a = given[ranking[0].second];
      m.component_b = given[ranking[1].second];
      m.cutoff_low = c.cutoff_low;
      m.cutoff_high = c.cutoff_high;
      const auto section = mix_stage(m, scores[std::string(to_string(m.component_a->algorithm))],
                                     scores[std::string(to_string(m.component_b->algorithm))], labels, c.grid_step,
                                     scores, dir);
      const auto target = predict.empty() ? test : load_dataset(predict, c.csv);
      Warnings warnings;
      const auto p = predict_mixture(m, target, &warnings);
      const auto result = classify_probabilities(p, m.cutoff_low, m.cutoff_high);
      write_file_atomic(dir / "labels.csv", labels_csv(row_ids(target), p, result));
      for (const auto& w : warnings) err << "warning: " << w << "\n";
      out << "alpha " << section["alpha"].get<double>() << " (" << to_string(m.component_a->algorithm) << " + "
          << to_string(m.component_b->algorithm) << "), mixture AUC " << section["auc"].get<double>() << "\n";
      out << "INN " << result.count(AbstentionLabel::inn) << ", NOINN " << result.count(AbstentionLabel::noinn)
          << ", UNCLASSIFIED " << result.count(AbstentionLabel::unclassified) << "\n";
      return kExitOk;
    };
  });

  // predict -------------------------------------------------------------------
  auto* predict_cmd = app.add_subcommand("predict", "Label new data with a saved mixture and build the survival dataset");
  common(predict_cmd);
  predict_cmd->add_option("--mixture", mixture_path, "mixture.json")->required();
  predict_cmd->add_option("--data", data, "Cleaned predict-era CSV")->required();
  predict_cmd->add_option("--raw", raw, "Raw predict-era CSV for the survival dataset (default: --data)");
  predict_cmd->add_option("--out-dir", out_dir, "Output directory (labels.csv, survival.csv, predict.json)");
  bind(predict_cmd, s, "--indicator", "predict.indicator", "Name of the predicted-label column");
  predict_cmd->callback([&] {
    action = [&] {
      const auto c = effective();
      const auto dir = prepare_dir(out_dir);
      const auto m = load_mixture(mixture_path);
      const auto cleaned = load_dataset(data, c.csv);
      const auto original = raw.empty() ? cleaned : load_dataset(raw, c.csv);
      const auto result = predict_stage(m, cleaned, original, c.indicator, dir);
      save_dataset(result.survival, dir / "survival.csv", c.csv);
      write_file_atomic(dir / "predict.json", dump_json(result.section));
      for (const auto& w : result.section["warnings"]) err << "warning: " << w.get<std::string>() << "\n";
      const auto& counts = result.section["counts"];
      out << "INN " << counts["INN"] << ", NOINN " << counts["NOINN"] << ", UNCLASSIFIED " << counts["UNCLASSIFIED"]
          << "; survival dataset " << result.survival.n_rows() << " rows\n";
      return kExitOk;
    };
  });

  // km ------------------------------------------------------------------------
  auto* km = app.add_subcommand("km", "Kaplan-Meier curves by a 0/1 group and the log-rank test");
  common(km);
  km->add_option("--data", data, "Survival CSV")->required();
  km->add_option("--group", group, "0/1 grouping column (default: predict.indicator)");
  km->add_option("--out-dir", out_dir, "Output directory (km.csv, logrank.json, km.svg)");
  bind(km, s, "--level", "km.level", "Confidence level");
  bind(km, s, "--horizon", "km.horizon", "Summary horizon in years");
  km->callback([&] {
    action = [&] {
      const auto c = effective();
      const auto dir = prepare_dir(out_dir);
      const auto section =
          km_stage(load_dataset(data, c.csv), group.empty() ? c.indicator : group, c.km_level, c.km_horizon, dir);
      for (const auto& [name, g] : section["groups"].items())
        out << name << ": n " << g["n"] << ", S(" << c.km_horizon << ") " << g["survival_at_horizon"].get<double>()
            << "\n";
      if (!section["logrank"].is_null())
        out << "log-rank chi2 " << section["logrank"]["chi_square"].get<double>() << ", p "
            << section["logrank"]["p_value"].get<double>() << "\n";
      return kExitOk;
    };
  });

  // cox -----------------------------------------------------------------------
  auto* cox = app.add_subcommand("cox", "Cox proportional-hazards models");
  common(cox);
  cox->add_option("--data", data, "Survival CSV")->required();
  cox->add_option("--formula", formulas, "Model formula, e.g. \"inno + sector + inno:sector\" (repeatable)");
  cox->add_option("--out-dir", out_dir, "Output directory (cox.json, cox.txt)");
  bind(cox, s, "--ties", "cox.ties", "efron or breslow");
  bind(cox, s, "--references", "cox.references", "auto, standard, or a file of 'column = level' lines");
  bind_switch(cox, s, "--screen", "cox.screen", "true", "Drop separated columns before fitting (default)");
  bind_switch(cox, s, "--no-screen", "cox.screen", "false", "Fit separated columns and fail on them");
  cox->callback([&] {
    action = [&] {
      const auto c = effective();
      const auto dir = prepare_dir(out_dir);
      std::vector<std::string> list;
      for (const auto& f : formulas)
        for (auto& g : split_formulas(f)) list.push_back(std::move(g));
      if (list.empty()) list = c.cox_models;
      std::vector<CoxModelResult> results;
      cox_stage(load_dataset(data, c.csv), list, c.references, c.cox, dir, &results);
      out << cox_summary_table(results);
      int status = kExitOk;
      for (const auto& r : results) {
        for (const auto& f : r.flags)
          err << r.label << " separation: column " << f.column
              << (f.direction > 0 ? " (coefficient tends to +inf)" : f.direction < 0 ? " (coefficient tends to -inf)" : "")
              << "\n";
        if (r.error.empty()) continue;
        err << r.label << " " << r.formula << ": " << r.error << "\n";
        const int code = r.error_kind == "domain" ? kExitData : kExitNumerical;
        status = std::max(status, code);
      }
      return status;
    };
  });

  // pipeline ------------------------------------------------------------------
  auto* pipeline = app.add_subcommand("pipeline", "Run every stage end to end");
  common(pipeline);
  bind(pipeline, s, "--train", "data.train", "Training-era CSV (default: synthetic)");
  bind(pipeline, s, "--predict", "data.predict", "Predict-era CSV");
  bind(pipeline, s, "--out-dir", "output.dir", "Output directory");
  bind(pipeline, s, "--algorithms", "train.algorithms", "Comma-separated algorithms");
  bind(pipeline, s, "--mix-components", "mix.components", "Two comma-separated algorithms, or auto");
  bind(pipeline, s, "--train-fraction", "split.fraction", "Training fraction");
  bind(pipeline, s, "--smote-k", "smote.k", "Nearest minority neighbours");
  bind(pipeline, s, "--smote-over", "smote.over", "Synthetic rows as a percentage of the minority");
  bind(pipeline, s, "--smote-under", "smote.under", "Kept majority rows as a percentage of the synthetic rows");
  bind(pipeline, s, "--alpha-grid-step", "mix.grid_step", "Weight grid step");
  bind(pipeline, s, "--cutoff-low", "mix.cutoff_low", "Probabilities below are NOINN");
  bind(pipeline, s, "--cutoff-high", "mix.cutoff_high", "Probabilities above are INN");
  bind(pipeline, s, "--ties", "cox.ties", "efron or breslow");
  bind(pipeline, s, "--references", "cox.references", "auto, standard, or a references file");
  bind(pipeline, s, "--rows", "synthetic.rows", "Synthetic training-era rows");
  bind_switch(pipeline, s, "--resume", "run.resume", "true", "Reuse completed stages of an identical earlier run");
  pipeline->callback([&] {
    action = [&] {
      const auto c = effective();
      const auto outcome = run_pipeline(c);
      const auto& report = outcome.report;
      if (outcome.error) {
        err << "stage '" << outcome.failed_stage << "' failed; partial report in "
            << (c.output_dir / "report.json").string() << "\n";
        std::rethrow_exception(outcome.error);
      }
      const auto& stages = report["stages"];
      out << "report " << (c.output_dir / "report.json").string() << "\n";
      out << "mixture " << stages["mix"]["components"][0].get<std::string>() << " + "
          << stages["mix"]["components"][1].get<std::string>() << ", alpha " << stages["mix"]["alpha"].get<double>()
          << ", AUC " << stages["mix"]["auc"].get<double>() << "\n";
      const auto& fractions = stages["predict"]["fractions"];
      out << "INN " << percent(fractions["INN"].get<double>()) << ", NOINN "
          << percent(fractions["NOINN"].get<double>()) << ", UNCLASSIFIED "
          << percent(fractions["UNCLASSIFIED"].get<double>()) << "\n";
      return kExitOk;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    return action();
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace innosurv
