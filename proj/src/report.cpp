#include "innosurv/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "innosurv/stats.hpp"

namespace innosurv {

using nlohmann::json;

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json to_json(const MvaReport& report) {
  auto stages = [](const std::vector<MvaStage>& list) {
    json out = json::array();
    for (const auto& s : list) {
      out.push_back({{"name", s.name},
                     {"rows_in", s.rows_in},
                     {"rows_out", s.rows_out},
                     {"cols_in", s.cols_in},
                     {"cols_out", s.cols_out},
                     {"threshold", s.threshold ? json(*s.threshold) : json(nullptr)},
                     {"dropped_columns", s.dropped_columns}});
    }
    return out;
  };
  return {{"primary", stages(report.primary)},
          {"secondary", report.secondary.empty() ? json(nullptr) : stages(report.secondary)},
          {"class_ratio_before", report.primary_class_ratio_before ? json(*report.primary_class_ratio_before) : json(nullptr)},
          {"class_ratio_after", report.primary_class_ratio_after ? json(*report.primary_class_ratio_after) : json(nullptr)},
          {"warnings", report.warnings}};
}

json to_json(const ConfusionMatrix& m) {
  return {{"tn", m.tn},
          {"fp", m.fp},
          {"fn", m.fn},
          {"tp", m.tp},
          {"sensitivity", m.sensitivity()},
          {"specificity", m.specificity()},
          {"precision", m.precision()},
          {"accuracy", m.accuracy()}};
}

json to_json(const ScoreEvaluation& evaluation) {
  json cutoffs = json::object();
  for (const auto& c : evaluation.cutoffs)
    cutoffs[std::string(to_string(c.criterion))] = {{"cutoff", c.cutoff}, {"confusion", to_json(c.matrix)}};
  return {{"auc", evaluation.roc.auc},
          {"positives", evaluation.roc.positives},
          {"negatives", evaluation.roc.negatives},
          {"roc_points", evaluation.roc.points.size()},
          {"cutoffs", std::move(cutoffs)}};
}

json to_json(const WeightSearch& search) {
  json trace = json::array();
  for (const auto& t : search.trace)
    trace.push_back({{"alpha", t.alpha}, {"auc", t.auc}, {"separation", t.separation}, {"objective", t.objective}});
  return {{"alpha", search.alpha}, {"trace", std::move(trace)}};
}

json to_json(const AbstentionResult& result) {
  json counts = json::object();
  json fractions = json::object();
  for (auto l : {AbstentionLabel::noinn, AbstentionLabel::inn, AbstentionLabel::unclassified}) {
    counts[std::string(to_string(l))] = result.count(l);
    fractions[std::string(to_string(l))] = result.fraction(l);
  }
  return {{"rows", result.labels.size()}, {"counts", std::move(counts)}, {"fractions", std::move(fractions)}};
}

json to_json(const KMCurve& curve) {
  json rows = json::array();
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const bool has_var = i < curve.variance_defined.size() && curve.variance_defined[i];
    const bool has_ci = i < curve.ci_defined.size() && curve.ci_defined[i];
    rows.push_back({{"time", curve.times[i]},
                    {"at_risk", curve.at_risk[i]},
                    {"deaths", curve.deaths[i]},
                    {"survival", curve.survival[i]},
                    {"sd", has_var ? json(std::sqrt(curve.variance[i])) : json(nullptr)},
                    {"ci_lo", has_ci ? json(curve.ci_lower[i]) : json(nullptr)},
                    {"ci_hi", has_ci ? json(curve.ci_upper[i]) : json(nullptr)}});
  }
  return {{"n", curve.n}, {"confidence_level", curve.confidence_level}, {"steps", std::move(rows)}};
}

json to_json(const LogrankResult& result) {
  return {{"chi_square", result.chi_square},
          {"df", result.df},
          {"p_value", result.p_value},
          {"observed_a", result.observed_a},
          {"expected_a", result.expected_a},
          {"variance", result.variance}};
}

json to_json(const WelchResult& result) {
  return {{"t", result.t}, {"df", result.df}, {"p_value", result.p_value}};
}

namespace {

json test_json(const ChiSquareTest& t) {
  return {{"statistic", t.statistic}, {"df", t.df}, {"p_value", t.p_value}};
}

double wald_p(double beta, double se) {
  if (!(se > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return 2.0 * normal_cdf(-std::abs(beta / se));
}

std::string stars(double p) {
  if (!std::isfinite(p)) return "";
  if (p < 0.01) return "***";
  if (p < 0.05) return "**";
  if (p < 0.1) return "*";
  return "";
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string csv_number(double v) { return std::isfinite(v) ? format_number(v) : std::string(); }

}  // namespace

json to_json(const CoxModelResult& model) {
  json out = {{"label", model.label},
              {"formula", model.formula},
              {"n", model.n},
              {"events", model.events},
              {"reference_levels", model.design.reference_levels}};
  json dropped = json::array();
  for (const auto& d : model.design.dropped) dropped.push_back({{"column", d.name}, {"reason", d.reason}});
  out["dropped_columns"] = std::move(dropped);
  json flags = json::array();
  for (const auto& f : model.flags) flags.push_back({{"column", f.column}, {"direction", f.direction}});
  out["separation_flags"] = std::move(flags);
  if (!model.error.empty()) {
    out["status"] = "failed";
    out["error"] = model.error;
    out["error_kind"] = model.error_kind;
    out["coefficients"] = json::array();
    out["tests"] = nullptr;
    return out;
  }
  out["status"] = "ok";
  out["error"] = nullptr;
  const auto& fit = *model.fit;
  json coefs = json::array();
  const auto hrs = hazard_ratios(fit);
  for (std::size_t j = 0; j < fit.beta.size(); ++j) {
    coefs.push_back({{"name", fit.names[j]},
                     {"term", model.design.term_of[j]},
                     {"beta", fit.beta[j]},
                     {"se", fit.se[j]},
                     {"z", fit.beta[j] / fit.se[j]},
                     {"p_value", number_or_null(wald_p(fit.beta[j], fit.se[j]))},
                     {"hazard_ratio", hrs[j].ratio},
                     {"ci_lo", hrs[j].lower},
                     {"ci_hi", hrs[j].upper}});
  }
  out["coefficients"] = std::move(coefs);
  out["ties"] = std::string(to_string(fit.ties));
  out["iterations"] = fit.iterations;
  out["converged"] = fit.converged;
  out["loglik_null"] = fit.loglik_null;
  out["loglik"] = fit.loglik_fit;
  if (model.tests) {
    out["tests"] = {{"wald", test_json(model.tests->wald)},
                    {"lr", test_json(model.tests->lr)},
                    {"score", model.tests->score ? test_json(*model.tests->score) : json(nullptr)}};
  } else {
    out["tests"] = nullptr;
  }
  return out;
}

std::string roc_csv(const RocCurve& roc) {
  std::string out = "threshold,fpr,tpr\n";
  for (const auto& p : roc.points)
    out += format_number(p.threshold) + "," + format_number(p.fpr) + "," + format_number(p.tpr) + "\n";
  return out;
}

std::string km_csv(const std::map<std::string, KMCurve>& curves) {
  std::string out = "group,time,at_risk,deaths,survival,sd,ci_lo,ci_hi\n";
  for (const auto& [group, c] : curves) {
    for (std::size_t i = 0; i < c.size(); ++i) {
      const bool has_var = i < c.variance_defined.size() && c.variance_defined[i];
      const bool has_ci = i < c.ci_defined.size() && c.ci_defined[i];
      out += group + "," + format_number(c.times[i]) + "," + std::to_string(c.at_risk[i]) + "," +
             std::to_string(c.deaths[i]) + "," + format_number(c.survival[i]) + "," +
             (has_var ? csv_number(std::sqrt(c.variance[i])) : "") + "," + (has_ci ? csv_number(c.ci_lower[i]) : "") +
             "," + (has_ci ? csv_number(c.ci_upper[i]) : "") + "\n";
    }
  }
  return out;
}

std::string labels_csv(const std::vector<std::string>& ids, const std::vector<double>& probabilities,
                       const AbstentionResult& labels) {
  std::string out = "id,probability,label\n";
  for (std::size_t i = 0; i < probabilities.size(); ++i)
    out += ids[i] + "," + format_number(probabilities[i]) + "," + std::string(to_string(labels.labels[i])) + "\n";
  return out;
}

std::string cox_summary_table(const std::vector<CoxModelResult>& models) {
  // Row labels: numeric main effects get coefficient rows, every other term a YES/blank row.
  std::vector<std::string> coef_rows;
  std::vector<std::string> term_rows;
  for (const auto& m : models) {
    for (std::size_t j = 0; j < m.design.column_names.size(); ++j) {
      const auto& name = m.design.column_names[j];
      const auto& term = m.design.term_of[j];
      auto& list = name == term ? coef_rows : term_rows;
      if (std::find(list.begin(), list.end(), name == term ? name : term) == list.end())
        list.push_back(name == term ? name : term);
    }
  }
  std::vector<std::vector<std::string>> table;
  std::vector<std::string> header = {""};
  for (const auto& m : models) header.push_back(m.label);
  table.push_back(header);

  auto row = [&](const std::string& label, auto cell) {
    std::vector<std::string> r = {label};
    for (const auto& m : models) r.push_back(cell(m));
    table.push_back(std::move(r));
  };
  auto column_of = [](const CoxModelResult& m, const std::string& name) -> std::optional<std::size_t> {
    if (!m.fit) return std::nullopt;
    for (std::size_t j = 0; j < m.fit->names.size(); ++j)
      if (m.fit->names[j] == name) return j;
    return std::nullopt;
  };
  for (const auto& name : coef_rows) {
    row(name, [&](const CoxModelResult& m) -> std::string {
      const auto j = column_of(m, name);
      if (!j) return "";
      return fixed(m.fit->beta[*j], 3) + stars(wald_p(m.fit->beta[*j], m.fit->se[*j]));
    });
    row("", [&](const CoxModelResult& m) -> std::string {
      const auto j = column_of(m, name);
      if (!j) return "";
      return "(" + fixed(m.fit->se[*j], 3) + ")";
    });
  }
  for (const auto& term : term_rows) {
    row(term, [&](const CoxModelResult& m) -> std::string {
      if (!m.fit) return "";
      return std::find(m.design.term_of.begin(), m.design.term_of.end(), term) != m.design.term_of.end() ? "YES" : "";
    });
  }
  table.push_back({});
  row("Observations", [](const CoxModelResult& m) { return std::to_string(m.n); });
  row("Log Likelihood", [](const CoxModelResult& m) { return m.fit ? fixed(m.fit->loglik_fit, 3) : "failed"; });
  auto test_cell = [](const std::optional<ChiSquareTest>& t) {
    return t ? fixed(t->statistic, 3) + stars(t->p_value) : std::string("n/a");
  };
  row("Wald Test", [&](const CoxModelResult& m) {
    return m.tests ? test_cell(m.tests->wald) : std::string("");
  });
  row("LR Test", [&](const CoxModelResult& m) { return m.tests ? test_cell(m.tests->lr) : std::string(""); });
  row("Score (Logrank) Test", [&](const CoxModelResult& m) {
    return m.tests ? test_cell(m.tests->score) : std::string("");
  });
  row("Df", [](const CoxModelResult& m) { return m.fit ? std::to_string(m.fit->beta.size()) : std::string(""); });

  std::vector<std::size_t> widths;
  for (const auto& r : table)
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (widths.size() <= c) widths.push_back(0);
      widths[c] = std::max(widths[c], r[c].size());
    }
  std::size_t total = 0;
  for (auto w : widths) total += w + 2;
  const std::string rule(total, '-');
  std::string out = rule + "\n";
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& r = table[i];
    if (r.empty()) {
      out += rule + "\n";
      continue;
    }
    std::string line;
    for (std::size_t c = 0; c < r.size(); ++c) {
      const auto padding = std::string(widths[c] - r[c].size(), ' ');
      line += c == 0 ? r[c] + padding : padding + r[c];
      line += "  ";
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
    if (i == 0) out += rule + "\n";
  }
  out += rule + "\n";
  out += "Note: *p<0.1; **p<0.05; ***p<0.01\n";
  for (const auto& m : models)
    if (!m.error.empty()) out += m.label + " failed: " + m.error + "\n";
  return out;
}

namespace {

const char* const kStageNames[] = {"data", "clean", "split", "smote", "train", "evaluate", "mix", "predict", "km", "cox"};

}  // namespace

std::vector<std::string> validate_report(const json& report) {
  std::vector<std::string> problems;
  auto need = [&](const json& obj, const char* key, auto predicate, const char* what) {
    if (!obj.is_object() || !obj.contains(key)) {
      problems.push_back(std::string("missing key '") + key + "'");
      return false;
    }
    if (!predicate(obj.at(key))) {
      problems.push_back(std::string("key '") + key + "' must be " + what);
      return false;
    }
    return true;
  };
  auto is_int = [](const json& v) { return v.is_number_integer(); };
  auto is_obj = [](const json& v) { return v.is_object(); };
  auto is_str = [](const json& v) { return v.is_string(); };
  auto is_str_or_null = [](const json& v) { return v.is_string() || v.is_null(); };
  auto is_obj_or_null = [](const json& v) { return v.is_object() || v.is_null(); };

  if (!report.is_object()) return {"report must be a JSON object"};
  if (need(report, "schema_version", is_int, "an integer") && report.at("schema_version") != kReportSchemaVersion)
    problems.push_back("unsupported schema_version");
  if (need(report, "tool", is_obj, "an object")) {
    need(report.at("tool"), "name", is_str, "a string");
    need(report.at("tool"), "version", is_str, "a string");
  }
  need(report, "seed", is_int, "an integer");
  if (need(report, "config", is_obj, "an object"))
    for (const auto& [k, v] : report.at("config").items())
      if (!v.is_string()) problems.push_back("config value '" + k + "' must be a string");
  need(report, "status", [](const json& v) { return v == "ok" || v == "failed"; }, "\"ok\" or \"failed\"");
  need(report, "failed_stage", is_str_or_null, "a string or null");
  need(report, "error", is_str_or_null, "a string or null");
  if (need(report, "timing", is_obj, "an object"))
    for (const auto& [k, v] : report.at("timing").items())
      if (!v.is_number()) problems.push_back("timing value '" + k + "' must be a number");
  if (need(report, "stages", is_obj, "an object")) {
    const auto& stages = report.at("stages");
    for (const char* name : kStageNames) need(stages, name, is_obj_or_null, "an object or null");
    for (const auto& [k, v] : stages.items())
      if (std::find_if(std::begin(kStageNames), std::end(kStageNames), [&](const char* s) { return k == s; }) ==
          std::end(kStageNames))
        problems.push_back("unknown stage '" + k + "'");
    if (stages.contains("evaluate") && stages.at("evaluate").is_object()) {
      const auto& ev = stages.at("evaluate");
      if (need(ev, "algorithms", is_obj, "an object"))
        for (const auto& [alg, v] : ev.at("algorithms").items())
          if (v.is_object() && v.contains("auc") && !(v.at("auc").is_number() && v.at("auc") >= 0.0 && v.at("auc") <= 1.0))
            problems.push_back("AUC of '" + alg + "' must be a number in [0, 1]");
    }
    if (stages.contains("mix") && stages.at("mix").is_object()) {
      const auto& mix = stages.at("mix");
      if (need(mix, "alpha", [](const json& v) { return v.is_number(); }, "a number") &&
          !(mix.at("alpha") >= 0.0 && mix.at("alpha") <= 1.0))
        problems.push_back("mixture alpha must lie in [0, 1]");
    }
    if (stages.contains("predict") && stages.at("predict").is_object()) {
      const auto& pr = stages.at("predict");
      if (need(pr, "rows", is_int, "an integer") && need(pr, "counts", is_obj, "an object")) {
        std::int64_t sum = 0;
        for (const auto& [k, v] : pr.at("counts").items()) sum += v.get<std::int64_t>();
        if (sum != pr.at("rows").get<std::int64_t>()) problems.push_back("abstention counts must sum to rows");
      }
    }
  }
  return problems;
}

std::string dump_json(const json& doc) { return doc.dump(2) + "\n"; }

}  // namespace innosurv
