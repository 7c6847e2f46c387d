#include "innosurv/cox.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include <Eigen/Dense>

#include "innosurv/errors.hpp"
#include "innosurv/linear.hpp"
#include "innosurv/stats.hpp"

namespace innosurv {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_on(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      parts.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  return parts;
}

Eigen::Map<const RowMajor> view(const Matrix& m) {
  return {m.values.data(), static_cast<Eigen::Index>(m.rows), static_cast<Eigen::Index>(m.cols)};
}

Matrix from_eigen(const Eigen::MatrixXd& m) {
  Matrix out(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out(r, c) = m(r, c);
  return out;
}

struct Column {
  std::string name;
  std::vector<double> values;
};

}  // namespace

// ---------------------------------------------------------------------------
// Formulas and designs

std::vector<Term> parse_formula(std::string_view formula) {
  std::vector<Term> terms;
  auto add = [&](Term t) {
    if (std::find(terms.begin(), terms.end(), t) == terms.end()) terms.push_back(std::move(t));
  };
  if (trim(formula).empty()) throw ParseError("empty formula");
  for (auto piece : split_on(formula, '+')) {
    if (piece.empty()) throw ParseError("formula '" + std::string(formula) + "' has an empty term");
    if (piece.find('*') != std::string_view::npos) {
      std::vector<std::string> factors;
      for (auto f : split_on(piece, '*')) {
        if (f.empty() || f.find(':') != std::string_view::npos)
          throw ParseError("formula term '" + std::string(piece) + "' is malformed");
        factors.emplace_back(f);
      }
      // Every non-empty subset, lower orders first.
      const std::size_t k = factors.size();
      if (k > 8) throw ParseError("too many crossed factors in '" + std::string(piece) + "'");
      std::vector<Term> expanded;
      for (unsigned mask = 1; mask < (1u << k); ++mask) {
        Term t;
        for (std::size_t j = 0; j < k; ++j)
          if (mask & (1u << j)) t.push_back(factors[j]);
        expanded.push_back(std::move(t));
      }
      std::stable_sort(expanded.begin(), expanded.end(),
                       [](const Term& a, const Term& b) { return a.size() < b.size(); });
      for (auto& t : expanded) add(std::move(t));
    } else {
      Term t;
      for (auto f : split_on(piece, ':')) {
        if (f.empty()) throw ParseError("formula term '" + std::string(piece) + "' is malformed");
        t.emplace_back(f);
      }
      add(std::move(t));
    }
  }
  std::stable_sort(terms.begin(), terms.end(), [](const Term& a, const Term& b) { return a.size() < b.size(); });
  return terms;
}

std::string format_term(const Term& term) {
  std::string out;
  for (std::size_t i = 0; i < term.size(); ++i) {
    if (i) out += ':';
    out += term[i];
  }
  return out;
}

ReferenceLevels parse_references(std::string_view text) {
  ReferenceLevels refs;
  std::size_t line_no = 0;
  for (auto line : split_on(text, '\n')) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = trim(line.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ParseError("references line " + std::to_string(line_no) + ": expected 'column = level'");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ParseError("references line " + std::to_string(line_no) + ": expected 'column = level'");
    refs[std::string(key)] = std::string(value);
  }
  return refs;
}

DesignMatrix build_design(const Dataset& data, std::span<const Term> terms, const ReferenceLevels& references) {
  if (terms.empty()) throw DomainError("formula has no terms");
  std::vector<std::size_t> factor_cols;
  std::map<std::string, std::size_t> factor_index;
  for (const auto& term : terms)
    for (const auto& f : term)
      if (!factor_index.count(f)) {
        factor_index[f] = data.index_of(f);
        factor_cols.push_back(factor_index[f]);
      }
  const auto duration = data.role_column(ColumnRole::duration);
  const auto event = data.role_column(ColumnRole::event);
  if (!duration || !event) throw DomainError("Cox regression needs duration and event columns");

  DesignMatrix design;
  for (std::size_t r = 0; r < data.n_rows(); ++r) {
    bool complete = !data.missing(r, *duration) && !data.missing(r, *event);
    for (auto c : factor_cols) complete = complete && !data.missing(r, c);
    if (complete) design.rows.push_back(r);
  }
  const std::size_t n = design.rows.size();
  if (n == 0) throw DomainError("no complete rows for the formula");

  // Per-factor columns.
  std::map<std::string, std::vector<Column>> factor_columns;
  for (const auto& [name, col] : factor_index) {
    const auto& spec = data.spec(col);
    std::vector<Column> cols;
    if (spec.kind == ColumnKind::numeric) {
      Column c{name, std::vector<double>(n)};
      for (std::size_t i = 0; i < n; ++i) c.values[i] = data.cell(design.rows[i], col);
      cols.push_back(std::move(c));
    } else {
      std::vector<std::size_t> counts(spec.vocabulary.size(), 0);
      for (auto r : design.rows) ++counts[static_cast<std::size_t>(data.cell(r, col))];
      const auto observed = std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; });
      if (observed < 2) throw DomainError("categorical column '" + name + "' has fewer than two observed levels");
      std::size_t ref = static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
      if (const auto it = references.find(name); it != references.end()) {
        const auto pos = std::find(spec.vocabulary.begin(), spec.vocabulary.end(), it->second);
        if (pos == spec.vocabulary.end())
          throw DomainError("unknown reference level '" + it->second + "' for column '" + name + "'");
        ref = static_cast<std::size_t>(pos - spec.vocabulary.begin());
      }
      design.reference_levels[name] = spec.vocabulary[ref];
      for (std::size_t level = 0; level < spec.vocabulary.size(); ++level) {
        if (level == ref) continue;
        Column c{name + "[" + spec.vocabulary[level] + "]", std::vector<double>(n)};
        for (std::size_t i = 0; i < n; ++i)
          c.values[i] = static_cast<std::size_t>(data.cell(design.rows[i], col)) == level ? 1.0 : 0.0;
        cols.push_back(std::move(c));
      }
    }
    factor_columns[name] = std::move(cols);
  }

  // Term columns: cartesian products of the factors' columns.
  std::vector<Column> columns;
  std::vector<std::string> term_of;
  for (const auto& term : terms) {
    std::vector<Column> acc = factor_columns.at(term.front());
    for (std::size_t k = 1; k < term.size(); ++k) {
      std::vector<Column> next;
      for (const auto& a : acc)
        for (const auto& b : factor_columns.at(term[k])) {
          Column c{a.name + ":" + b.name, std::vector<double>(n)};
          for (std::size_t i = 0; i < n; ++i) c.values[i] = a.values[i] * b.values[i];
          next.push_back(std::move(c));
        }
      acc = std::move(next);
    }
    for (auto& c : acc) {
      columns.push_back(std::move(c));
      term_of.push_back(format_term(term));
    }
  }

  std::vector<std::size_t> keep;
  for (std::size_t j = 0; j < columns.size(); ++j) {
    const bool zero = std::all_of(columns[j].values.begin(), columns[j].values.end(), [](double v) { return v == 0.0; });
    if (zero)
      design.dropped.push_back({columns[j].name, "all zero"});
    else
      keep.push_back(j);
  }
  Matrix candidate(n, keep.size());
  for (std::size_t k = 0; k < keep.size(); ++k)
    for (std::size_t i = 0; i < n; ++i) candidate(i, k) = columns[keep[k]].values[i];
  const auto aliased = aliased_columns(candidate, true);
  std::vector<std::size_t> final_cols;
  for (std::size_t k = 0; k < keep.size(); ++k) {
    if (std::find(aliased.begin(), aliased.end(), k) != aliased.end())
      design.dropped.push_back({columns[keep[k]].name, "aliased"});
    else
      final_cols.push_back(keep[k]);
  }
  if (final_cols.empty()) throw DomainError("design is empty after removing degenerate columns");

  design.matrix = Matrix(n, final_cols.size());
  for (std::size_t k = 0; k < final_cols.size(); ++k) {
    design.column_names.push_back(columns[final_cols[k]].name);
    design.term_of.push_back(term_of[final_cols[k]]);
    for (std::size_t i = 0; i < n; ++i) design.matrix(i, k) = columns[final_cols[k]].values[i];
  }
  return design;
}

DesignMatrix build_design(const Dataset& data, std::string_view formula, const ReferenceLevels& references) {
  const auto terms = parse_formula(formula);
  return build_design(data, terms, references);
}

DesignMatrix drop_columns(const DesignMatrix& design, std::span<const std::string> names, const std::string& reason) {
  DesignMatrix out;
  out.reference_levels = design.reference_levels;
  out.rows = design.rows;
  out.dropped = design.dropped;
  std::vector<std::size_t> keep;
  for (std::size_t j = 0; j < design.p(); ++j) {
    if (std::find(names.begin(), names.end(), design.column_names[j]) != names.end()) {
      out.dropped.push_back({design.column_names[j], reason});
    } else {
      keep.push_back(j);
      out.column_names.push_back(design.column_names[j]);
      out.term_of.push_back(design.term_of[j]);
    }
  }
  out.matrix = Matrix(design.n(), keep.size());
  for (std::size_t i = 0; i < design.n(); ++i)
    for (std::size_t k = 0; k < keep.size(); ++k) out.matrix(i, k) = design.matrix(i, keep[k]);
  return out;
}

// ---------------------------------------------------------------------------
// Partial likelihood

std::string_view to_string(CoxTies ties) { return ties == CoxTies::efron ? "efron" : "breslow"; }

CoxTies parse_ties(std::string_view name) {
  if (name == "efron") return CoxTies::efron;
  if (name == "breslow") return CoxTies::breslow;
  throw DomainError("unknown ties method '" + std::string(name) + "' (expected efron or breslow)");
}

namespace {

struct Evaluation {
  double loglik = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd information;  // minus the Hessian
};

std::vector<std::size_t> descending_time(std::span<const SurvivalSample> samples) {
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return samples[a].duration > samples[b].duration; });
  return order;
}

Evaluation evaluate(const Matrix& x, std::span<const SurvivalSample> samples, const Eigen::VectorXd& beta,
                    CoxTies ties, const std::vector<std::size_t>& order) {
  const auto p = static_cast<Eigen::Index>(x.cols);
  const auto X = view(x);
  const Eigen::VectorXd eta = p > 0 ? Eigen::VectorXd(X * beta) : Eigen::VectorXd::Zero(static_cast<Eigen::Index>(x.rows));
  const double shift = eta.size() > 0 ? eta.maxCoeff() : 0.0;

  Evaluation ev;
  ev.gradient = Eigen::VectorXd::Zero(p);
  ev.information = Eigen::MatrixXd::Zero(p, p);

  double s0 = 0.0;
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd a1(p), xd(p), s1l(p);
  Eigen::MatrixXd a2(p, p), s2l(p, p);

  std::size_t i = 0;
  while (i < order.size()) {
    const double t = samples[order[i]].duration;
    double a0 = 0.0;
    a1.setZero();
    a2.setZero();
    xd.setZero();
    double eta_d = 0.0;
    std::size_t d = 0;
    for (; i < order.size() && samples[order[i]].duration == t; ++i) {
      const auto r = static_cast<Eigen::Index>(order[i]);
      const double w = std::exp(eta[r] - shift);
      const auto xr = X.row(r).transpose();
      s0 += w;
      s1.noalias() += w * xr;
      s2.noalias() += w * xr * xr.transpose();
      if (samples[order[i]].event == 1) {
        ++d;
        a0 += w;
        a1.noalias() += w * xr;
        a2.noalias() += w * xr * xr.transpose();
        xd += xr;
        eta_d += eta[r];
      }
    }
    if (d == 0) continue;
    ev.loglik += eta_d;
    ev.gradient += xd;
    const auto dd = static_cast<double>(d);
    for (std::size_t l = 0; l < d; ++l) {
      const double frac = ties == CoxTies::efron ? static_cast<double>(l) / dd : 0.0;
      const double s0l = s0 - frac * a0;
      s1l = s1 - frac * a1;
      s2l = s2 - frac * a2;
      ev.loglik -= std::log(s0l) + shift;
      ev.gradient -= s1l / s0l;
      ev.information += s2l / s0l - (s1l / s0l) * (s1l / s0l).transpose();
    }
  }
  return ev;
}

void check_alignment(const Matrix& x, std::span<const SurvivalSample> samples) {
  if (x.rows != samples.size())
    throw DomainError("design has " + std::to_string(x.rows) + " rows but there are " +
                      std::to_string(samples.size()) + " subjects");
  for (const auto& s : samples) {
    if (!(s.duration > 0.0) || !std::isfinite(s.duration)) throw DomainError("durations must be positive and finite");
    if (s.event != 0 && s.event != 1) throw DomainError("events must be 0 or 1");
  }
}

}  // namespace

PartialLikelihood cox_partial_likelihood(const Matrix& x, std::span<const SurvivalSample> samples,
                                         std::span<const double> beta, CoxTies ties) {
  check_alignment(x, samples);
  if (beta.size() != x.cols) throw DomainError("coefficient vector does not match the design width");
  const Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size()));
  const auto ev = evaluate(x, samples, b, ties, descending_time(samples));
  PartialLikelihood out;
  out.loglik = ev.loglik;
  out.gradient.assign(ev.gradient.data(), ev.gradient.data() + ev.gradient.size());
  out.hessian = from_eigen(-ev.information);
  return out;
}

CoxFit cox_fit(const DesignMatrix& design, std::span<const SurvivalSample> samples, const CoxOptions& options) {
  const Matrix& x = design.matrix;
  check_alignment(x, samples);
  const auto p = static_cast<Eigen::Index>(x.cols);
  CoxFit fit;
  fit.names = design.column_names;
  fit.ties = options.ties;
  fit.n = samples.size();
  for (const auto& s : samples) fit.events += static_cast<std::size_t>(s.event);
  if (fit.events == 0) throw DomainError("Cox regression needs at least one event");

  if (p > 0) {
    const auto aliased = aliased_columns(x, true);
    if (!aliased.empty()) {
      std::vector<std::string> names;
      for (auto j : aliased) names.push_back(design.column_names[j]);
      std::string list;
      for (const auto& n : names) list += (list.empty() ? "" : ", ") + n;
      throw SingularError(names, "singular design: dependent columns " + list);
    }
  }

  const auto order = descending_time(samples);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Evaluation cur = evaluate(x, samples, beta, options.ties, order);
  fit.loglik_null = cur.loglik;

  auto singular = [&](const std::string& where) {
    return SingularError(design.column_names, "information matrix is singular " + where);
  };

  if (p == 0) {
    fit.converged = true;
    fit.loglik_fit = cur.loglik;
    return fit;
  }

  fit.converged = cur.gradient.cwiseAbs().maxCoeff() < options.tolerance;
  while (!fit.converged && fit.iterations < options.max_iterations) {
    Eigen::LDLT<Eigen::MatrixXd> solver(cur.information);
    if (solver.info() != Eigen::Success || !solver.isPositive() ||
        solver.vectorD().minCoeff() <= 1e-14 * std::max(1.0, solver.vectorD().maxCoeff()))
      throw singular("during Newton iterations");
    Eigen::VectorXd step = solver.solve(cur.gradient);
    Eigen::VectorXd next = beta + step;
    Evaluation trial = evaluate(x, samples, next, options.ties, order);
    for (int halving = 0; halving < 30 && !(trial.loglik >= cur.loglik); ++halving) {
      step *= 0.5;
      next = beta + step;
      trial = evaluate(x, samples, next, options.ties, order);
    }
    ++fit.iterations;
    if (!(trial.loglik >= cur.loglik)) break;  // no ascent possible from here

    const bool rising = trial.loglik > cur.loglik;
    for (Eigen::Index j = 0; j < p; ++j)
      if (std::abs(next[j]) > options.separation_bound && rising) {
        const auto& name = design.column_names[static_cast<std::size_t>(j)];
        std::ostringstream msg;
        msg << "complete separation: coefficient of '" << name << "' reached " << next[j]
            << " with the partial likelihood still increasing";
        throw SeparationError(name, msg.str());
      }

    const double change = std::abs(trial.loglik - cur.loglik) / std::max(std::abs(cur.loglik), 1e-300);
    beta = next;
    cur = std::move(trial);
    fit.converged = change < options.tolerance || cur.gradient.cwiseAbs().maxCoeff() < options.tolerance;
  }

  fit.loglik_fit = cur.loglik;
  fit.beta.assign(beta.data(), beta.data() + p);
  fit.information = from_eigen(cur.information);
  Eigen::LDLT<Eigen::MatrixXd> solver(cur.information);
  if (solver.info() != Eigen::Success || !solver.isPositive() ||
      solver.vectorD().minCoeff() <= 1e-14 * std::max(1.0, solver.vectorD().maxCoeff()))
    throw singular("at the estimate");
  const Eigen::MatrixXd cov = solver.solve(Eigen::MatrixXd::Identity(p, p));
  for (Eigen::Index j = 0; j < p; ++j) fit.se.push_back(std::sqrt(cov(j, j)));
  return fit;
}

CoxTests cox_tests(const CoxFit& fit, const DesignMatrix& design, std::span<const SurvivalSample> samples) {
  const auto p = static_cast<Eigen::Index>(fit.beta.size());
  CoxTests out;
  const double df = static_cast<double>(p);
  out.wald.df = out.lr.df = df;
  if (p == 0) {
    out.score = ChiSquareTest{0.0, 0.0, 1.0};
    return out;
  }
  if (!fit.converged) throw NumericalError("tests need a converged fit");
  const Eigen::VectorXd beta = Eigen::Map<const Eigen::VectorXd>(fit.beta.data(), p);
  const auto info = view(fit.information);
  out.wald.statistic = beta.dot(info * beta);
  out.wald.p_value = chi_square_sf(out.wald.statistic, df);
  out.lr.statistic = std::max(0.0, 2.0 * (fit.loglik_fit - fit.loglik_null));
  out.lr.p_value = chi_square_sf(out.lr.statistic, df);

  check_alignment(design.matrix, samples);
  const auto null = evaluate(design.matrix, samples, Eigen::VectorXd::Zero(p), fit.ties, descending_time(samples));
  Eigen::LDLT<Eigen::MatrixXd> solver(null.information);
  if (solver.info() == Eigen::Success && solver.isPositive() &&
      solver.vectorD().minCoeff() > 1e-14 * std::max(1.0, solver.vectorD().maxCoeff())) {
    ChiSquareTest score;
    score.df = df;
    score.statistic = null.gradient.dot(solver.solve(null.gradient));
    score.p_value = chi_square_sf(score.statistic, df);
    out.score = score;
  }
  return out;
}

double hazard_ratio(double beta) { return std::exp(beta); }

std::vector<HazardRatio> hazard_ratios(const CoxFit& fit, double level) {
  const double z = normal_quantile(0.5 + 0.5 * level);
  std::vector<HazardRatio> out;
  for (std::size_t j = 0; j < fit.beta.size(); ++j) {
    const double se = j < fit.se.size() ? fit.se[j] : 0.0;
    out.push_back({fit.names[j], fit.beta[j], hazard_ratio(fit.beta[j]), std::exp(fit.beta[j] - z * se),
                   std::exp(fit.beta[j] + z * se)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Separation screen

std::vector<SeparationFlag> detect_separation(const DesignMatrix& design, std::span<const SurvivalSample> samples) {
  check_alignment(design.matrix, samples);
  const auto order = descending_time(samples);
  std::vector<SeparationFlag> flags;
  for (std::size_t j = 0; j < design.p(); ++j) {
    bool binary = true;
    for (std::size_t i = 0; i < design.n() && binary; ++i) {
      const double v = design.matrix(i, j);
      binary = v == 0.0 || v == 1.0;
    }
    if (!binary) continue;

    bool plus_ok = true, plus_strict = false, minus_ok = true, minus_strict = false;
    std::size_t carriers = 0, others = 0;  // at risk
    std::size_t i = 0;
    while (i < order.size()) {
      const double t = samples[order[i]].duration;
      std::size_t dead_carriers = 0, dead_others = 0;
      for (; i < order.size() && samples[order[i]].duration == t; ++i) {
        const bool carrier = design.matrix(order[i], j) == 1.0;
        (carrier ? carriers : others)++;
        if (samples[order[i]].event == 1) (carrier ? dead_carriers : dead_others)++;
      }
      if (dead_carriers + dead_others == 0) continue;
      if (dead_others > 0 && carriers > 0) plus_ok = false;
      if (dead_others == 0 && others > 0) plus_strict = true;
      if (dead_carriers > 0 && others > 0) minus_ok = false;
      if (dead_carriers == 0 && carriers > 0) minus_strict = true;
    }
    if (plus_ok && plus_strict)
      flags.push_back({design.column_names[j], +1});
    else if (minus_ok && minus_strict)
      flags.push_back({design.column_names[j], -1});
    else if (plus_ok && minus_ok)
      flags.push_back({design.column_names[j], 0});
  }
  return flags;
}

}  // namespace innosurv
