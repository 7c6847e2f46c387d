#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "innosurv/dataset.hpp"
#include "innosurv/features.hpp"
#include "innosurv/survival.hpp"

namespace innosurv {

// ---------------------------------------------------------------------------
// Design matrices

// A model term: one factor for a main effect, several for an interaction.
using Term = std::vector<std::string>;

// "a + b + a:b" or "a*b" (which expands to a, b, a:b). Terms come back
// ordered by interaction order, duplicates removed.
std::vector<Term> parse_formula(std::string_view formula);
std::string format_term(const Term& term);

using ReferenceLevels = std::map<std::string, std::string>;

// Lines of "column = level"; '#' starts a comment.
ReferenceLevels parse_references(std::string_view text);

struct DroppedColumn {
  std::string name;
  std::string reason;  // "all zero", "aliased", "separation"
};

struct DesignMatrix {
  std::vector<std::string> column_names;
  std::vector<std::string> term_of;  // originating term, per column
  ReferenceLevels reference_levels;  // categorical factors only
  Matrix matrix;                     // n x p
  std::vector<std::size_t> rows;     // source dataset rows, one per matrix row
  std::vector<DroppedColumn> dropped;

  std::size_t n() const noexcept { return matrix.rows; }
  std::size_t p() const noexcept { return matrix.cols; }
};

// Categorical factors are dummy coded against `references` (default: the
// most frequent level among the kept rows). Interaction columns are products
// of their parents' columns. Rows with a missing formula factor, duration or
// event are dropped. All-zero and aliased columns are removed and listed.
DesignMatrix build_design(const Dataset& data, std::span<const Term> terms, const ReferenceLevels& references = {});
DesignMatrix build_design(const Dataset& data, std::string_view formula, const ReferenceLevels& references = {});

// Same rows, listed columns removed (recorded with `reason`).
DesignMatrix drop_columns(const DesignMatrix& design, std::span<const std::string> names, const std::string& reason);

// ---------------------------------------------------------------------------
// Partial likelihood

enum class CoxTies { efron, breslow };

std::string_view to_string(CoxTies ties);
CoxTies parse_ties(std::string_view name);

struct PartialLikelihood {
  double loglik = 0.0;
  std::vector<double> gradient;
  Matrix hessian;  // p x p, negative semi-definite
};

PartialLikelihood cox_partial_likelihood(const Matrix& x, std::span<const SurvivalSample> samples,
                                         std::span<const double> beta, CoxTies ties = CoxTies::efron);

struct CoxOptions {
  CoxTies ties = CoxTies::efron;
  std::size_t max_iterations = 25;
  double tolerance = 1e-9;
  double separation_bound = 15.0;
};

struct CoxFit {
  std::vector<std::string> names;
  std::vector<double> beta;
  std::vector<double> se;
  Matrix information;  // observed information at beta
  double loglik_null = 0.0;
  double loglik_fit = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  CoxTies ties = CoxTies::efron;
  std::size_t n = 0;
  std::size_t events = 0;
};

// Newton-Raphson from beta = 0 with step halving. Throws SeparationError
// when a coefficient passes the separation bound while the log-likelihood is
// still rising, SingularError when the information matrix is singular.
CoxFit cox_fit(const DesignMatrix& design, std::span<const SurvivalSample> samples, const CoxOptions& options = {});

struct ChiSquareTest {
  double statistic = 0.0;
  double df = 0.0;
  double p_value = 1.0;
};

struct CoxTests {
  ChiSquareTest wald;
  ChiSquareTest lr;
  std::optional<ChiSquareTest> score;  // absent when the null information is singular
};

CoxTests cox_tests(const CoxFit& fit, const DesignMatrix& design, std::span<const SurvivalSample> samples);

struct HazardRatio {
  std::string name;
  double beta = 0.0;
  double ratio = 1.0;
  double lower = 1.0;
  double upper = 1.0;
};

double hazard_ratio(double beta);
std::vector<HazardRatio> hazard_ratios(const CoxFit& fit, double level = 0.95);

// ---------------------------------------------------------------------------
// Separation screen

struct SeparationFlag {
  std::string column;
  // +1: partial likelihood rises without bound as the coefficient grows,
  // -1: as it falls, 0: the column carries no risk-set information.
  int direction = 0;
};

// Exact single-column condition for 0/1 columns: at every event time either
// all deaths are carriers or no carrier is at risk (+1), or the mirror image
// (-1), with at least one event time where the likelihood strictly moves.
std::vector<SeparationFlag> detect_separation(const DesignMatrix& design, std::span<const SurvivalSample> samples);

}  // namespace innosurv
