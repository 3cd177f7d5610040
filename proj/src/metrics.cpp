#include "cogload/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "cogload/error.hpp"

namespace cogload {

double weighted_f1(std::span<const std::uint8_t> y_true, std::span<const std::uint8_t> y_pred) {
  if (y_true.size() != y_pred.size()) throw ValidationError("weighted_f1: length mismatch");
  if (y_true.empty()) throw ValidationError("weighted_f1: empty input");

  // confusion[t][p]
  std::array<std::array<std::size_t, 2>, 2> confusion{};
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] > 1 || y_pred[i] > 1) throw ValidationError("weighted_f1: labels must be binary");
    ++confusion[y_true[i]][y_pred[i]];
  }

  double score = 0.0;
  const auto total = static_cast<double>(y_true.size());
  for (std::size_t c = 0; c < 2; ++c) {
    const auto tp = static_cast<double>(confusion[c][c]);
    const auto support = static_cast<double>(confusion[c][0] + confusion[c][1]);
    const auto predicted = static_cast<double>(confusion[0][c] + confusion[1][c]);
    const double precision = predicted > 0 ? tp / predicted : 0.0;
    const double recall = support > 0 ? tp / support : 0.0;
    const double f1 = precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    score += f1 * support / total;
  }
  return score;
}

namespace {

// Modified Lentz evaluation of the incomplete-beta continued fraction.
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-15;
  constexpr double kTiny = 1e-300;

  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw Error("incomplete beta: continued fraction did not converge");
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw ValidationError("incomplete beta: a and b must be positive");
  if (x < 0.0 || x > 1.0 || std::isnan(x)) throw ValidationError("incomplete beta: x outside [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                           b * std::log1p(-x);
  const double front = std::exp(log_front);
  // The fraction converges fast for x < (a+1)/(a+b+2); use symmetry otherwise.
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
  if (!(df > 0.0)) throw ValidationError("t distribution needs positive degrees of freedom");
  if (std::isnan(t)) throw ValidationError("t statistic is NaN");
  if (std::isinf(t)) return 0.0;
  return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

CorrelationRecord pearson(std::span<const double> x, std::span<const double> y, std::string x_name,
                          std::string y_name) {
  if (x.size() != y.size()) throw ValidationError("pearson: length mismatch");
  const std::size_t n = x.size();
  if (n < 3) throw ValidationError("pearson: need at least 3 points, got " + std::to_string(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw ValidationError("pearson: non-finite value");
  }

  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) {
    throw ValidationError("pearson: correlation of " + x_name + " vs " + y_name +
                          " is undefined (zero variance)");
  }

  CorrelationRecord rec{std::move(x_name), std::move(y_name), n, 0.0, 1.0};
  rec.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double df = static_cast<double>(n - 2);
  const double one_minus = 1.0 - rec.r * rec.r;
  rec.p = one_minus <= 0.0 ? 0.0 : student_t_two_sided_p(rec.r * std::sqrt(df / one_minus), df);
  return rec;
}

}  // namespace cogload
