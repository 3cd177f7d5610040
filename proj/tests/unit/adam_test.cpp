#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "cogload/error.hpp"
#include "cogload/trainer.hpp"

namespace cogload::cnn {
namespace {

// Scalar Adam in the Keras formulation, kept deliberately naive.
struct ScalarAdam {
  double w, m = 0.0, v = 0.0;
  int t = 0;
  void step(double g, double lr, double b1 = 0.9, double b2 = 0.999, double eps = 1e-7) {
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double alpha = lr * std::sqrt(1 - std::pow(b2, t)) / (1 - std::pow(b1, t));
    w -= alpha * m / (std::sqrt(v) + eps);
  }
};

TEST(Adam, FirstStepWithUnitGradient) {
  std::vector<float> w(5, 0.5f);
  const std::vector<float> g(5, 1.0f);
  AdamState s(5);
  adam_step(w, g, s, 1e-3);
  // m = 0.1, v = 0.001, step = lr * sqrt(v)/(sqrt(v)+eps) = lr / (1 + eps/sqrt(0.001)).
  const double expected = 0.5 - 1e-3 / (1.0 + 1e-7 / std::sqrt(0.001));
  for (float x : w) EXPECT_NEAR(x, expected, 1e-7);
  EXPECT_EQ(s.step, 1);
  EXPECT_NEAR(s.m[0], 0.1f, 1e-7);
  EXPECT_NEAR(s.v[0], 0.001f, 1e-9);
}

TEST(Adam, ZeroGradientOnlyAdvancesTimestep) {
  std::vector<float> w{1.0f, -2.0f, 3.0f};
  const auto before = w;
  AdamState s(3);
  adam_step(w, std::vector<float>(3, 0.0f), s, 1e-3);
  EXPECT_EQ(w, before);
  EXPECT_EQ(s.m, std::vector<float>(3, 0.0f));
  EXPECT_EQ(s.v, std::vector<float>(3, 0.0f));
  EXPECT_EQ(s.step, 1);
}

TEST(Adam, MatchesScalarReferenceTrace) {
  const double grads[] = {0.5, 0.5, -1.25, 3.0, 0.01, 0.0, -0.3};
  ScalarAdam ref{0.2};
  std::vector<float> w{0.2f};
  AdamState s(1);
  for (double g : grads) {
    ref.step(g, 1e-3);
    adam_step(w, std::vector<float>{static_cast<float>(g)}, s, 1e-3);
    EXPECT_NEAR(w[0], ref.w, 1e-6);
  }
  EXPECT_EQ(s.step, 7);
}

TEST(Adam, TwoEqualStepsMatchReference) {
  ScalarAdam ref{1.0};
  ref.step(2.0, 1e-4);
  ref.step(2.0, 1e-4);
  std::vector<float> w{1.0f};
  AdamState s(1);
  adam_step(w, std::vector<float>{2.0f}, s, 1e-4);
  adam_step(w, std::vector<float>{2.0f}, s, 1e-4);
  EXPECT_NEAR(w[0], ref.w, 1e-7);
}

TEST(Adam, NonFiniteGradientLeavesEverythingUntouched) {
  std::vector<float> w{1.0f, 2.0f};
  AdamState s(2);
  adam_step(w, std::vector<float>{0.1f, 0.2f}, s, 1e-3);
  const auto w0 = w;
  const auto s0 = s;
  EXPECT_THROW(adam_step(w, std::vector<float>{0.1f, std::numeric_limits<float>::quiet_NaN()}, s, 1e-3),
               NonFiniteError);
  EXPECT_THROW(adam_step(w, std::vector<float>{std::numeric_limits<float>::infinity(), 0.0f}, s, 1e-3),
               NonFiniteError);
  EXPECT_EQ(w, w0);
  EXPECT_EQ(s.m, s0.m);
  EXPECT_EQ(s.v, s0.v);
  EXPECT_EQ(s.step, s0.step);
}

TEST(Adam, SizeMismatchIsRejected) {
  std::vector<float> w(3);
  AdamState s(3);
  EXPECT_THROW(adam_step(w, std::vector<float>(2), s, 1e-3), Error);
}

}  // namespace
}  // namespace cogload::cnn
