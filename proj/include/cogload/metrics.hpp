#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

namespace cogload {

/// Support-weighted mean of the per-class F1 scores over classes {0, 1}.
/// Precision, recall and F1 are 0 wherever their denominator is 0.
double weighted_f1(std::span<const std::uint8_t> y_true, std::span<const std::uint8_t> y_pred);

struct CorrelationRecord {
  std::string x_name;
  std::string y_name;
  std::size_t n = 0;
  double r = 0.0;
  double p = 1.0;
};

/// Sample Pearson correlation with a two-sided p-value from Student's t with
/// n-2 degrees of freedom. Needs n >= 3, finite values, non-zero variance.
CorrelationRecord pearson(std::span<const double> x, std::span<const double> y,
                          std::string x_name = "x", std::string y_name = "y");

/// Regularised incomplete beta I_x(a, b), continued-fraction evaluation.
double regularized_incomplete_beta(double a, double b, double x);

/// P(|T| >= |t|) for Student's t with `df` degrees of freedom.
double student_t_two_sided_p(double t, double df);

}  // namespace cogload
