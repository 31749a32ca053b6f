#pragma once

#include <cstddef>
#include <span>

namespace beliefsim::stats {

// Univariate OLS fit of y on x with its F-test.
struct RegressionReport {
  std::size_t n = 0;
  double slope = 0.0;
  double intercept = 0.0;
  double r = 0.0;
  double f = 0.0;  // +inf when perfect_fit
  int df_model = 1;
  int df_residual = 0;
  double p = 1.0;  // upper-tail probability of f under F(1, n - 2)
  bool perfect_fit = false;  // |r| == 1; p is reported as 0
};

// Product-moment correlation. Throws UndefinedStatistic on zero variance.
double pearson_r(std::span<const double> x, std::span<const double> y);

// Requires n >= 3 and non-constant x. A constant y leaves r undefined and
// throws UndefinedStatistic.
RegressionReport f_test_univariate(std::span<const double> x, std::span<const double> y);

double mae(std::span<const double> predicted, std::span<const double> truth);

// Regularized incomplete beta I_x(a, b) via Lentz continued fraction
// (tolerance 1e-12, at most 300 iterations).
double regularized_incomplete_beta(double x, double a, double b);

double f_cdf(double f, double d1, double d2);
// 1 - f_cdf, evaluated without cancellation.
double f_upper_tail(double f, double d1, double d2);

}  // namespace beliefsim::stats
