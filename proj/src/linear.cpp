#include "innosurv/linear.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "innosurv/errors.hpp"
#include "innosurv/rng.hpp"

namespace innosurv {

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

}  // namespace

std::vector<std::size_t> aliased_columns(const Matrix& x, bool with_intercept, double tol) {
  const std::size_t n = x.rows;
  std::vector<Eigen::VectorXd> basis;
  if (with_intercept && n > 0) basis.push_back(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), 1.0 / std::sqrt(double(n))));
  std::vector<std::size_t> aliased;
  for (std::size_t c = 0; c < x.cols; ++c) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (std::size_t r = 0; r < n; ++r) v[static_cast<Eigen::Index>(r)] = x(r, c);
    const double norm0 = v.norm();
    if (norm0 == 0.0) {
      aliased.push_back(c);
      continue;
    }
    // Two passes of modified Gram-Schmidt for stability.
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& q : basis) v -= q.dot(v) * q;
    const double norm = v.norm();
    if (norm <= tol * norm0) {
      aliased.push_back(c);
      continue;
    }
    basis.push_back(v / norm);
  }
  return aliased;
}

// ---------------------------------------------------------------------------

double LogitModel::predict(std::span<const double> encoded) const {
  double eta = intercept;
  for (std::size_t j = 0; j < coefficients.size(); ++j) eta += coefficients[j] * encoded[j];
  return sigmoid(eta);
}

double logit_loglik(const Matrix& x, std::span<const int> y, double intercept, std::span<const double> beta) {
  double ll = 0.0;
  for (std::size_t r = 0; r < x.rows; ++r) {
    double eta = intercept;
    for (std::size_t j = 0; j < x.cols; ++j) eta += beta[j] * x(r, j);
    ll += y[r] * eta - softplus(eta);
  }
  return ll;
}

LogitModel fit_logit_matrix(const Matrix& x, std::span<const int> y, std::span<const std::string> names,
                            const LogitParams& params) {
  if (x.rows == 0) throw DomainError("logit: zero training rows");
  if (names.size() != x.cols) throw DomainError("logit: column names do not match the design");
  if (const auto dup = aliased_columns(x); !dup.empty()) {
    std::vector<std::string> cols;
    std::string list;
    for (std::size_t c : dup) {
      cols.push_back(names[c]);
      list += (list.empty() ? "" : ", ") + names[c];
    }
    throw SingularError(cols, "logit: rank-deficient design, aliased columns: " + list);
  }

  const auto n = static_cast<Eigen::Index>(x.rows);
  const auto p = static_cast<Eigen::Index>(x.cols + 1);
  Eigen::MatrixXd design(n, p);
  for (Eigen::Index r = 0; r < n; ++r) {
    design(r, 0) = 1.0;
    for (Eigen::Index c = 1; c < p; ++c) design(r, c) = x(static_cast<std::size_t>(r), static_cast<std::size_t>(c - 1));
  }
  Eigen::VectorXd yv(n);
  for (Eigen::Index r = 0; r < n; ++r) yv[r] = y[static_cast<std::size_t>(r)];

  auto loglik = [&](const Eigen::VectorXd& b) {
    const Eigen::VectorXd eta = design * b;
    double ll = 0.0;
    for (Eigen::Index r = 0; r < n; ++r) ll += yv[r] * eta[r] - softplus(eta[r]);
    return ll;
  };
  auto column_name = [&](Eigen::Index j) { return j == 0 ? std::string("(intercept)") : names[static_cast<std::size_t>(j - 1)]; };

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  double ll = loglik(beta);
  LogitModel model;
  bool converged = false;
  for (std::size_t it = 0; it < params.max_iterations; ++it) {
    const Eigen::VectorXd eta = design * beta;
    Eigen::VectorXd prob(n), w(n);
    for (Eigen::Index r = 0; r < n; ++r) {
      prob[r] = sigmoid(eta[r]);
      w[r] = prob[r] * (1.0 - prob[r]);
    }
    const Eigen::VectorXd score = design.transpose() * (yv - prob);
    if (score.cwiseAbs().maxCoeff() < 1e-8) {
      converged = true;
      model.iterations = it;
      break;
    }
    const Eigen::MatrixXd info = design.transpose() * w.asDiagonal() * design;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    Eigen::VectorXd step = ldlt.solve(score);
    if (ldlt.info() != Eigen::Success || !step.allFinite()) {
      // Information collapses when fitted probabilities saturate.
      Eigen::Index j;
      beta.cwiseAbs().maxCoeff(&j);
      throw SeparationError(column_name(j), "logit: information matrix became singular; separation on '" +
                                                column_name(j) + "'");
    }
    double t = 1.0;
    Eigen::VectorXd next = beta + step;
    double ll_next = loglik(next);
    for (int halving = 0; halving < 40 && !(ll_next >= ll - 1e-12 * std::abs(ll)); ++halving) {
      t *= 0.5;
      next = beta + t * step;
      ll_next = loglik(next);
    }
    const double change = ll_next - ll;
    beta = next;
    const double ll_prev = ll;
    ll = ll_next;
    model.iterations = it + 1;

    Eigen::Index j;
    const double biggest = beta.cwiseAbs().maxCoeff(&j);
    if (biggest > params.separation_bound && change > 0.0)
      throw SeparationError(column_name(j), "logit: perfect separation, coefficient of '" + column_name(j) +
                                                "' exceeds " + std::to_string(params.separation_bound) +
                                                " with the likelihood still increasing");
    if (std::abs(change) <= 1e-10 * std::abs(ll_prev)) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw NumericalError("logit: no convergence within " + std::to_string(params.max_iterations) + " iterations");
  model.intercept = beta[0];
  model.coefficients.assign(beta.data() + 1, beta.data() + p);
  model.loglik = ll;
  return model;
}

// ---------------------------------------------------------------------------

double NaiveBayesModel::predict(std::span<const double> raw) const {
  double lp[2] = {std::log(prior[0]), std::log(prior[1])};
  for (std::size_t j = 0; j < features.size(); ++j) {
    const auto& f = features[j];
    for (int c = 0; c < 2; ++c) {
      if (std::isinf(lp[c]) && lp[c] < 0) continue;
      if (f.kind == ColumnKind::numeric) {
        const double d = raw[j] - f.mean[c];
        lp[c] += -0.5 * std::log(2.0 * std::numbers::pi * f.var[c]) - 0.5 * d * d / f.var[c];
      } else {
        lp[c] += f.log_prob[c][static_cast<std::size_t>(raw[j])];
      }
    }
  }
  if (std::isinf(lp[1]) && lp[1] < 0) return 0.0;
  if (std::isinf(lp[0]) && lp[0] < 0) return 1.0;
  return 1.0 / (1.0 + std::exp(lp[0] - lp[1]));
}

NaiveBayesModel fit_naive_bayes_matrix(const Matrix& raw, std::span<const int> y, const FeatureSchema& schema,
                                       const NaiveBayesParams& params) {
  if (raw.rows == 0) throw DomainError("naive Bayes: zero training rows");
  NaiveBayesModel model;
  double count[2] = {0.0, 0.0};
  for (int v : y) count[v == 1] += 1.0;
  const double n = static_cast<double>(raw.rows);
  for (int c = 0; c < 2; ++c) model.prior[c] = count[c] / n;

  for (std::size_t j = 0; j < schema.size(); ++j) {
    const auto& info = schema.features()[j];
    NaiveBayesModel::Feature f;
    f.kind = info.kind;
    if (info.kind == ColumnKind::numeric) {
      double sum[2] = {0, 0};
      for (std::size_t r = 0; r < raw.rows; ++r) sum[y[r] == 1] += raw(r, j);
      for (int c = 0; c < 2; ++c) f.mean[c] = count[c] > 0 ? sum[c] / count[c] : 0.0;
      double ss[2] = {0, 0};
      for (std::size_t r = 0; r < raw.rows; ++r) {
        const int c = y[r] == 1;
        ss[c] += (raw(r, j) - f.mean[c]) * (raw(r, j) - f.mean[c]);
      }
      for (int c = 0; c < 2; ++c) {
        const double var = count[c] > 1 ? ss[c] / (count[c] - 1.0) : 0.0;
        f.var[c] = std::max(var, params.variance_floor);
      }
    } else {
      const std::size_t levels = info.levels.size();
      for (int c = 0; c < 2; ++c) f.log_prob[c].assign(levels, 0.0);
      std::vector<double> tab[2] = {std::vector<double>(levels, 0.0), std::vector<double>(levels, 0.0)};
      for (std::size_t r = 0; r < raw.rows; ++r) tab[y[r] == 1][static_cast<std::size_t>(raw(r, j))] += 1.0;
      for (int c = 0; c < 2; ++c) {
        const double denom = count[c] + params.laplace * static_cast<double>(levels);
        for (std::size_t k = 0; k < levels; ++k)
          f.log_prob[c][k] = denom > 0 ? std::log((tab[c][k] + params.laplace) / denom) : 0.0;
      }
    }
    model.features.push_back(std::move(f));
  }
  return model;
}

// ---------------------------------------------------------------------------

double ann_forward(const AnnShape& shape, std::span<const double> params, std::span<const double> x) {
  const double* w1 = params.data();
  const double* b1 = w1 + shape.hidden * shape.inputs;
  const double* w2 = b1 + shape.hidden;
  const double b2 = w2[shape.hidden];
  double out = b2;
  for (std::size_t h = 0; h < shape.hidden; ++h) {
    double a = b1[h];
    for (std::size_t i = 0; i < shape.inputs; ++i) a += w1[h * shape.inputs + i] * x[i];
    out += w2[h] * sigmoid(a);
  }
  return sigmoid(out);
}

double ann_objective(const AnnShape& shape, std::span<const double> params, const Matrix& x, std::span<const int> y,
                     double weight_decay, std::span<double> grad) {
  const std::size_t H = shape.hidden, D = shape.inputs;
  const double* w1 = params.data();
  const double* b1 = w1 + H * D;
  const double* w2 = b1 + H;
  const double b2 = w2[H];
  const bool want_grad = !grad.empty();
  if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);
  double* g_w1 = want_grad ? grad.data() : nullptr;
  double* g_b1 = want_grad ? g_w1 + H * D : nullptr;
  double* g_w2 = want_grad ? g_b1 + H : nullptr;

  std::vector<double> hidden(H);
  double loss = 0.0;
  const double inv_n = 1.0 / static_cast<double>(x.rows);
  for (std::size_t r = 0; r < x.rows; ++r) {
    const auto xr = x.row(r);
    double z = b2;
    for (std::size_t h = 0; h < H; ++h) {
      double a = b1[h];
      const double* wrow = w1 + h * D;
      for (std::size_t i = 0; i < D; ++i) a += wrow[i] * xr[i];
      hidden[h] = sigmoid(a);
      z += w2[h] * hidden[h];
    }
    // Cross-entropy in logit form: softplus(z) - y z.
    loss += softplus(z) - y[r] * z;
    if (!want_grad) continue;
    const double delta = (sigmoid(z) - y[r]) * inv_n;
    g_w1[H * D + H + H] += delta;  // output bias
    for (std::size_t h = 0; h < H; ++h) {
      g_w2[h] += delta * hidden[h];
      const double dh = delta * w2[h] * hidden[h] * (1.0 - hidden[h]);
      g_b1[h] += dh;
      double* grow = g_w1 + h * D;
      for (std::size_t i = 0; i < D; ++i) grow[i] += dh * xr[i];
    }
  }
  loss *= inv_n;
  double penalty = 0.0;
  for (std::size_t k = 0; k < H * D; ++k) penalty += w1[k] * w1[k];
  for (std::size_t h = 0; h < H; ++h) penalty += w2[h] * w2[h];
  loss += 0.5 * weight_decay * penalty;
  if (want_grad) {
    for (std::size_t k = 0; k < H * D; ++k) g_w1[k] += weight_decay * w1[k];
    for (std::size_t h = 0; h < H; ++h) g_w2[h] += weight_decay * w2[h];
  }
  return loss;
}

double AnnModel::predict(std::span<const double> encoded) const {
  std::vector<double> z(encoded.size());
  for (std::size_t i = 0; i < encoded.size(); ++i) z[i] = (encoded[i] - center[i]) / scale[i];
  return ann_forward(shape, params, z);
}

AnnModel fit_ann_matrix(const Matrix& x, std::span<const int> y, const std::vector<bool>& standardize,
                        const AnnParams& params, std::uint64_t seed) {
  if (x.rows == 0) throw DomainError("ann: zero training rows");
  if (params.hidden < 1) throw DomainError("ann: need at least one hidden unit");
  AnnModel model;
  model.shape = {x.cols, params.hidden};
  model.center.assign(x.cols, 0.0);
  model.scale.assign(x.cols, 1.0);
  for (std::size_t j = 0; j < x.cols; ++j) {
    if (j < standardize.size() && !standardize[j]) continue;
    double sum = 0.0;
    for (std::size_t r = 0; r < x.rows; ++r) sum += x(r, j);
    const double mu = sum / static_cast<double>(x.rows);
    double ss = 0.0;
    for (std::size_t r = 0; r < x.rows; ++r) ss += (x(r, j) - mu) * (x(r, j) - mu);
    const double sd = x.rows > 1 ? std::sqrt(ss / static_cast<double>(x.rows - 1)) : 0.0;
    model.center[j] = mu;
    model.scale[j] = sd > 0.0 ? sd : 1.0;
  }
  Matrix z(x.rows, x.cols);
  for (std::size_t r = 0; r < x.rows; ++r)
    for (std::size_t j = 0; j < x.cols; ++j) z(r, j) = (x(r, j) - model.center[j]) / model.scale[j];

  Rng rng(seed, "ann.init");
  model.params.resize(model.shape.size());
  for (double& w : model.params) w = rng.uniform() - 0.5;

  std::vector<double> grad(model.params.size());
  double loss = 0.0;
  for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
    loss = ann_objective(model.shape, model.params, z, y, params.weight_decay, grad);
    if (!std::isfinite(loss))
      throw NumericalError("ann: loss became non-finite at epoch " + std::to_string(epoch) +
                           "; try a smaller learning rate");
    for (std::size_t k = 0; k < grad.size(); ++k) model.params[k] -= params.learning_rate * grad[k];
  }
  model.final_loss = ann_objective(model.shape, model.params, z, y, params.weight_decay);
  if (!std::isfinite(model.final_loss))
    throw NumericalError("ann: loss became non-finite; try a smaller learning rate");
  return model;
}

}  // namespace innosurv
