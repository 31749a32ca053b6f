#include "beliefsim/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "beliefsim/error.hpp"

namespace beliefsim::stats {

namespace {

constexpr const char* kModule = "stats";
constexpr double kTolerance = 1e-12;
constexpr int kMaxIterations = 300;

struct Moments {
  double mean_x = 0.0;
  double mean_y = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
};

Moments centered_moments(std::span<const double> x, std::span<const double> y) {
  Moments m;
  const auto n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    m.mean_x += x[i];
    m.mean_y += y[i];
  }
  m.mean_x /= n;
  m.mean_y /= n;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - m.mean_x;
    const double dy = y[i] - m.mean_y;
    m.sxx += dx * dx;
    m.syy += dy * dy;
    m.sxy += dx * dy;
  }
  return m;
}

void require_same_length(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw DomainError(kModule, "length mismatch: " + std::to_string(x.size()) + " vs " +
                                   std::to_string(y.size()));
  }
}

double beta_continued_fraction(double x, double a, double b) {
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < kTolerance) {
      return h;
    }
  }
  throw NumericError(kModule, "incomplete beta continued fraction did not converge");
}

}  // namespace

double pearson_r(std::span<const double> x, std::span<const double> y) {
  require_same_length(x, y);
  if (x.size() < 2) {
    throw DomainError(kModule, "pearson_r needs at least 2 points");
  }
  const Moments m = centered_moments(x, y);
  if (m.sxx == 0.0 || m.syy == 0.0) {
    throw UndefinedStatistic(kModule, "pearson_r undefined: zero variance");
  }
  const double r = m.sxy / std::sqrt(m.sxx * m.syy);
  return std::clamp(r, -1.0, 1.0);
}

RegressionReport f_test_univariate(std::span<const double> x, std::span<const double> y) {
  require_same_length(x, y);
  if (x.size() < 3) {
    throw DomainError(kModule, "f_test_univariate needs at least 3 points");
  }
  const Moments m = centered_moments(x, y);
  if (m.sxx == 0.0) {
    throw UndefinedStatistic(kModule, "regressor is constant");
  }
  if (m.syy == 0.0) {
    throw UndefinedStatistic(kModule, "response is constant; correlation undefined");
  }

  RegressionReport report;
  report.n = x.size();
  report.df_residual = static_cast<int>(x.size()) - 2;
  report.slope = m.sxy / m.sxx;
  report.intercept = m.mean_y - report.slope * m.mean_x;
  report.r = std::clamp(m.sxy / std::sqrt(m.sxx * m.syy), -1.0, 1.0);

  const double sse = m.syy - m.sxy * m.sxy / m.sxx;
  if (sse <= 1e-14 * m.syy) {
    report.perfect_fit = true;
    report.r = report.r < 0 ? -1.0 : 1.0;
    report.f = std::numeric_limits<double>::infinity();
    report.p = 0.0;
    return report;
  }
  const double r2 = report.r * report.r;
  report.f = r2 * report.df_residual / (1.0 - r2);
  report.p = f_upper_tail(report.f, 1.0, report.df_residual);
  return report;
}

double mae(std::span<const double> predicted, std::span<const double> truth) {
  require_same_length(predicted, truth);
  if (predicted.empty()) {
    throw DomainError(kModule, "mae of empty vectors");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    total += std::fabs(predicted[i] - truth[i]);
  }
  return total / static_cast<double>(predicted.size());
}

double regularized_incomplete_beta(double x, double a, double b) {
  if (!(a > 0.0 && b > 0.0)) {
    throw DomainError(kModule, "incomplete beta needs positive shape parameters");
  }
  if (!(x >= 0.0 && x <= 1.0)) {
    throw DomainError(kModule, "incomplete beta argument outside [0, 1]");
  }
  if (x == 0.0 || x == 1.0) {
    return x;
  }
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_continued_fraction(x, a, b) / a;
  }
  return 1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b;
}

double f_cdf(double f, double d1, double d2) {
  if (!(d1 > 0.0 && d2 > 0.0)) {
    throw DomainError(kModule, "F distribution needs positive degrees of freedom");
  }
  if (f <= 0.0) {
    return 0.0;
  }
  if (std::isinf(f)) {
    return 1.0;
  }
  return regularized_incomplete_beta(d1 * f / (d1 * f + d2), 0.5 * d1, 0.5 * d2);
}

double f_upper_tail(double f, double d1, double d2) {
  if (!(d1 > 0.0 && d2 > 0.0)) {
    throw DomainError(kModule, "F distribution needs positive degrees of freedom");
  }
  if (f <= 0.0) {
    return 1.0;
  }
  if (std::isinf(f)) {
    return 0.0;
  }
  // 1 - I_{d1 f/(d1 f + d2)}(d1/2, d2/2) == I_{d2/(d2 + d1 f)}(d2/2, d1/2)
  return regularized_incomplete_beta(d2 / (d2 + d1 * f), 0.5 * d2, 0.5 * d1);
}

}  // namespace beliefsim::stats
