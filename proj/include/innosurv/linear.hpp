#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "innosurv/features.hpp"

namespace innosurv {

// Names of the columns of `x` (an intercept is implied) that are linear
// combinations of the intercept and earlier columns. Sequential Gram-Schmidt
// with relative tolerance `tol`.
std::vector<std::size_t> aliased_columns(const Matrix& x, bool with_intercept = true, double tol = 1e-10);

// ---------------------------------------------------------------------------
// Logistic regression

struct LogitParams {
  std::size_t max_iterations = 50;
  double separation_bound = 15.0;
};

struct LogitModel {
  double intercept = 0.0;
  std::vector<double> coefficients;  // one per encoded feature
  std::size_t iterations = 0;
  double loglik = 0.0;

  double predict(std::span<const double> encoded) const;
};

double logit_loglik(const Matrix& x, std::span<const int> y, double intercept, std::span<const double> beta);

// Newton-Raphson / IRLS with step halving. Stops when max |score| < 1e-8 or
// the relative log-likelihood change drops below 1e-10. Throws
// SeparationError when a coefficient passes separation_bound while the
// likelihood is still rising, SingularError for aliased columns.
LogitModel fit_logit_matrix(const Matrix& x, std::span<const int> y, std::span<const std::string> names,
                            const LogitParams& params = {});

// ---------------------------------------------------------------------------
// Gaussian / multinomial naive Bayes

struct NaiveBayesParams {
  double laplace = 1.0;
  double variance_floor = 1e-9;
};

struct NaiveBayesModel {
  struct Feature {
    ColumnKind kind = ColumnKind::numeric;
    double mean[2] = {0.0, 0.0};
    double var[2] = {1.0, 1.0};
    std::vector<double> log_prob[2];  // categorical, per level
  };
  double prior[2] = {0.5, 0.5};  // empirical class frequencies
  std::vector<Feature> features;

  double predict(std::span<const double> raw) const;
};

NaiveBayesModel fit_naive_bayes_matrix(const Matrix& raw, std::span<const int> y, const FeatureSchema& schema,
                                       const NaiveBayesParams& params = {});

// ---------------------------------------------------------------------------
// Single-hidden-layer network

struct AnnParams {
  std::size_t hidden = 8;
  double learning_rate = 0.1;
  std::size_t epochs = 500;
  double weight_decay = 1e-4;
};

// Flat parameter layout: hidden x inputs input weights (row-major), hidden
// biases, hidden output weights, one output bias.
struct AnnShape {
  std::size_t inputs = 0;
  std::size_t hidden = 0;
  std::size_t size() const noexcept { return hidden * inputs + hidden + hidden + 1; }
};

double ann_forward(const AnnShape& shape, std::span<const double> params, std::span<const double> x);

// Mean cross-entropy plus weight_decay / 2 times the squared norm of the
// weights (biases excluded). Writes the gradient when `grad` is non-empty.
double ann_objective(const AnnShape& shape, std::span<const double> params, const Matrix& x, std::span<const int> y,
                     double weight_decay, std::span<double> grad = {});

struct AnnModel {
  AnnShape shape;
  std::vector<double> center;  // per encoded input
  std::vector<double> scale;
  std::vector<double> params;
  double final_loss = 0.0;

  double predict(std::span<const double> encoded) const;
};

// Full-batch gradient descent from uniform(-0.5, 0.5) initial weights.
// Numeric inputs (those flagged in `standardize`) are centred and scaled.
AnnModel fit_ann_matrix(const Matrix& x, std::span<const int> y, const std::vector<bool>& standardize,
                        const AnnParams& params, std::uint64_t seed);

}  // namespace innosurv
