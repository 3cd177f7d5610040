#include <gtest/gtest.h>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <cmath>

#include "cogload/error.hpp"
#include "cogload/hashing.hpp"
#include "cogload/metrics.hpp"

namespace cogload {
namespace {

// Counts every cell of the confusion matrix by enumeration and applies the
// textbook definitions.
double brute_weighted_f1(const std::vector<std::uint8_t>& t, const std::vector<std::uint8_t>& p) {
  double total = 0.0;
  for (int c = 0; c < 2; ++c) {
    int tp = 0, fp = 0, fn = 0, support = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t[i] == c && p[i] == c) ++tp;
      if (t[i] != c && p[i] == c) ++fp;
      if (t[i] == c && p[i] != c) ++fn;
      if (t[i] == c) ++support;
    }
    const double precision = tp + fp ? double(tp) / (tp + fp) : 0.0;
    const double recall = tp + fn ? double(tp) / (tp + fn) : 0.0;
    const double f1 = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
    total += f1 * support;
  }
  return total / static_cast<double>(t.size());
}

std::vector<std::uint8_t> bits(unsigned v, unsigned n) {
  std::vector<std::uint8_t> out(n);
  for (unsigned i = 0; i < n; ++i) out[i] = (v >> i) & 1u;
  return out;
}

TEST(WeightedF1, HandComputedExample) {
  const std::vector<std::uint8_t> t{0, 0, 1, 1}, p{0, 1, 1, 1};
  EXPECT_NEAR(weighted_f1(t, p), (2.0 / 3.0 + 0.8) / 2.0, 1e-15);
}

TEST(WeightedF1, PerfectAndSingleClass) {
  const std::vector<std::uint8_t> t{0, 1, 1, 0, 1};
  EXPECT_EQ(weighted_f1(t, t), 1.0);
  const std::vector<std::uint8_t> ones(6, 1);
  EXPECT_EQ(weighted_f1(ones, ones), 1.0);
  const std::vector<std::uint8_t> zeros(6, 0);
  EXPECT_EQ(weighted_f1(ones, zeros), 0.0);
}

TEST(WeightedF1, ExhaustiveUpToLengthEight) {
  for (unsigned n = 1; n <= 8; ++n) {
    for (unsigned a = 0; a < (1u << n); ++a) {
      for (unsigned b = 0; b < (1u << n); ++b) {
        const auto t = bits(a, n), p = bits(b, n);
        ASSERT_NEAR(weighted_f1(t, p), brute_weighted_f1(t, p), 1e-12) << n << " " << a << " " << b;
      }
    }
  }
}

TEST(WeightedF1, InvariantUnderClassSwap) {
  Rng rng(3);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto n = 1 + rng.below(30);
    std::vector<std::uint8_t> t(n), p(n), ts(n), ps(n);
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = static_cast<std::uint8_t>(rng.below(2));
      p[i] = static_cast<std::uint8_t>(rng.below(2));
      ts[i] = 1 - t[i];
      ps[i] = 1 - p[i];
    }
    ASSERT_NEAR(weighted_f1(t, p), weighted_f1(ts, ps), 1e-12);
  }
}

TEST(WeightedF1, RejectsBadInput) {
  EXPECT_THROW(weighted_f1({}, {}), ValidationError);
  const std::vector<std::uint8_t> a{0, 1}, b{0}, c{0, 2};
  EXPECT_THROW(weighted_f1(a, b), ValidationError);
  EXPECT_THROW(weighted_f1(a, c), ValidationError);
}

TEST(Pearson, PerfectCorrelations) {
  const std::vector<double> x{1, 2, 3}, y{2, 4, 6};
  const auto r = pearson(x, y);
  EXPECT_EQ(r.r, 1.0);
  EXPECT_EQ(r.p, 0.0);
  EXPECT_EQ(r.n, 3u);
  const std::vector<double> x4{1, 2, 3, 4}, y4{4, 3, 2, 1};
  EXPECT_EQ(pearson(x4, y4).r, -1.0);
}

TEST(Pearson, TTableCriticalValues) {
  // Two-sided critical values of Student's t from standard printed tables.
  struct Row {
    double df, t, p;
  };
  const Row rows[] = {{10, 2.228, 0.05}, {20, 2.845, 0.01}, {5, 4.032, 0.01}, {120, 1.980, 0.05},
                      {120, 2.617, 0.01}, {1, 12.706, 0.05}, {30, 2.042, 0.05}, {60, 3.460, 0.001}};
  for (const auto& r : rows) EXPECT_NEAR(student_t_two_sided_p(r.t, r.df), r.p, 1e-3) << r.df << " " << r.t;
}

TEST(Pearson, PValueMatchesBoostStudentT) {
  for (double df : {1.0, 2.0, 3.0, 7.0, 28.0, 118.0, 438.0}) {
    boost::math::students_t dist(df);
    for (double t : {0.0, 0.1, 0.5, 1.0, 1.96, 2.5, 4.0, 10.0}) {
      const double expected = 2.0 * boost::math::cdf(boost::math::complement(dist, t));
      EXPECT_NEAR(student_t_two_sided_p(t, df), expected, 1e-10) << df << " " << t;
      EXPECT_NEAR(student_t_two_sided_p(-t, df), expected, 1e-10);
    }
  }
}

TEST(Pearson, IncompleteBetaMatchesBoost) {
  for (double a : {0.5, 1.0, 2.5, 15.0, 200.0}) {
    for (double b : {0.5, 1.0, 3.0, 40.0}) {
      for (double x : {0.0, 0.01, 0.3, 0.5, 0.77, 0.999, 1.0}) {
        EXPECT_NEAR(regularized_incomplete_beta(a, b, x), boost::math::ibeta(a, b, x), 1e-10)
            << a << " " << b << " " << x;
      }
    }
  }
}

TEST(Pearson, PoolSizedSignificance) {
  // r = 0.25 needs n near 125 for p = 0.005; at the pool sizes the analysis
  // produces the p-value falls monotonically with n.
  const auto p_at = [](double r, double n) {
    return student_t_two_sided_p(r * std::sqrt((n - 2) / (1 - r * r)), n - 2);
  };
  EXPECT_NEAR(p_at(0.25, 125), 0.005, 1e-3);
  EXPECT_NEAR(p_at(0.18, 130), 0.04, 1e-2);
  EXPECT_GT(p_at(0.25, 40), p_at(0.25, 120));
}

TEST(Pearson, AffineInvariance) {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = 3 + rng.below(40);
    std::vector<double> x(n), y(n), xs(n), yn(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = rng.normal();
      y[i] = 0.5 * x[i] + rng.normal();
    }
    const double a = rng.uniform(0.1, 10.0), b = rng.uniform(-5, 5);
    for (std::size_t i = 0; i < n; ++i) {
      xs[i] = a * x[i] + b;
      yn[i] = -a * y[i] + b;
    }
    const auto base = pearson(x, y);
    EXPECT_NEAR(pearson(xs, y).r, base.r, 1e-9);
    EXPECT_NEAR(pearson(x, yn).r, -base.r, 1e-9);
    EXPECT_NEAR(pearson(x, yn).p, base.p, 1e-9);
    EXPECT_LE(std::abs(base.r), 1.0);
    EXPECT_GE(base.p, 0.0);
    EXPECT_LE(base.p, 1.0);
  }
}

TEST(Pearson, UndefinedCasesAreErrors) {
  const std::vector<double> c{1, 1, 1}, x{1, 2, 3};
  EXPECT_THROW(pearson(c, x), ValidationError);
  EXPECT_THROW(pearson(x, c), ValidationError);
  const std::vector<double> two{1, 2};
  EXPECT_THROW(pearson(two, two), ValidationError);
  const std::vector<double> nan{1, NAN, 3};
  EXPECT_THROW(pearson(nan, x), ValidationError);
}

}  // namespace
}  // namespace cogload
