#pragma once

#include <span>
#include <vector>

namespace innosurv {

// Sample quantile by linear interpolation between order statistics
// (h = (n - 1) p, the "type 7" rule). On {1,2,3,4}: Q1 1.75, median 2.5,
// Q3 3.25. Input need not be sorted. Empty input returns NaN.
double quantile(std::span<const double> values, double p);

struct Quartiles {
  double q1 = 0.0;
  double q2 = 0.0;
  double q3 = 0.0;
};

Quartiles quartiles(std::span<const double> values);

double mean(std::span<const double> values);

// Unbiased (n - 1) sample variance; 0 for fewer than two values.
double variance(std::span<const double> values);

// Special functions. Absolute accuracy ~1e-12 or better across the
// parameter ranges used by the tests in this library.

// Regularized lower incomplete gamma P(a, x).
double regularized_gamma_p(double a, double x);
// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
double regularized_gamma_q(double a, double x);
// Regularized incomplete beta I_x(a, b).
double regularized_beta(double x, double a, double b);

double normal_cdf(double z);
// Inverse of normal_cdf. Acklam's rational approximation (relative error
// below 1.2e-9) followed by one Halley refinement against erfc.
double normal_quantile(double p);

double student_t_cdf(double t, double df);
// P(X > x) for X ~ chi-square(df).
double chi_square_sf(double x, double df);

}  // namespace innosurv
