#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "cogload/cnn.hpp"
#include "cogload/error.hpp"
#include "cogload/hashing.hpp"
#include "reference_cnn.hpp"
#include "synthetic.hpp"

namespace cogload::cnn {
namespace {

// Written out from the layer rules: two valid convolutions of width 3 shrink
// the input by 4, the pool halves it (floor), and conv2 has 8 channels.
std::size_t flat_features_oracle(std::size_t L) { return 8 * ((L - 2 - 2) / 2); }

std::vector<float> random_inputs(std::size_t n, Rng& rng) {
  std::vector<float> x(n);
  for (auto& v : x) v = static_cast<float>(rng.normal());
  return x;
}

ModelWeights random_model(std::size_t L, std::uint64_t seed, double bias_scale = 0.1) {
  auto w = glorot_init(architecture_for(L), seed);
  Rng rng(derive_seed(seed, "bias"));
  for (auto id : {TensorId::Conv1Bias, TensorId::Conv2Bias, TensorId::Fc1Bias, TensorId::OutBias}) {
    for (auto& b : w.tensor(id)) b = static_cast<float>(bias_scale * rng.normal());
  }
  return w;
}

TEST(Architecture, FlatFeaturesMatchShapeOracle) {
  EXPECT_EQ(architecture_for(640).flat_features(), 2544u);
  EXPECT_EQ(architecture_for(1920).flat_features(), 7664u);
  EXPECT_EQ(architecture_for(3840).flat_features(), 15344u);
  for (std::size_t L : {6u, 7u, 8u, 64u, 65u, 640u, 1920u, 3840u}) {
    EXPECT_EQ(architecture_for(L).flat_features(), flat_features_oracle(L)) << L;
  }
  EXPECT_THROW(architecture_for(4), ShapeError);
  EXPECT_THROW(architecture_for(5), ShapeError);  // pools to nothing
}

TEST(Architecture, ParameterCountAndLayout) {
  const auto a = architecture_for(64);
  const std::size_t F = flat_features_oracle(64);
  EXPECT_EQ(a.parameter_count(), 16 * 3 + 16 + 8 * 16 * 3 + 8 + 30 * F + 30 + 2 * 30 + 2);
  const auto layout = tensor_layout(a);
  EXPECT_EQ(layout[0].name, "conv1.kernel");
  EXPECT_EQ(layout[0].shape, (std::vector<std::size_t>{16, 1, 3}));
  EXPECT_EQ(layout[2].shape, (std::vector<std::size_t>{8, 16, 3}));
  EXPECT_EQ(layout[4].shape, (std::vector<std::size_t>{30, F}));
  EXPECT_EQ(layout[6].shape, (std::vector<std::size_t>{2, 30}));
  std::size_t offset = 0;
  for (const auto& t : layout) {
    EXPECT_EQ(t.offset, offset);
    offset += t.size;
  }
  EXPECT_EQ(offset, a.parameter_count());
}

TEST(Forward, ZeroModelGivesHalfHalf) {
  const auto w = ModelWeights::zeros(architecture_for(64));
  Rng rng(1);
  const auto probs = forward(w, random_inputs(5 * 64, rng));
  ASSERT_EQ(probs.rows, 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(probs(i, 0), 0.5f);
    EXPECT_EQ(probs(i, 1), 0.5f);
  }
}

TEST(Forward, RowsAreIndependentAndDuplicatesMatch) {
  const auto w = random_model(64, 3);
  Rng rng(2);
  auto x = random_inputs(6 * 64, rng);
  std::copy(x.begin(), x.begin() + 64, x.begin() + 3 * 64);
  const auto all = forward(w, x);
  EXPECT_EQ(all(0, 0), all(3, 0));
  EXPECT_EQ(all(0, 1), all(3, 1));
  for (std::size_t i = 0; i < 6; ++i) {
    const auto one = forward(w, std::span<const float>(x).subspan(i * 64, 64));
    EXPECT_EQ(one(0, 0), all(i, 0));
    EXPECT_EQ(one(0, 1), all(i, 1));
  }
}

TEST(Forward, MatchesReferenceNetwork) {
  const auto w = random_model(64, 11);
  Rng rng(12);
  const auto x = random_inputs(8 * 64, rng);
  const std::vector<std::uint8_t> labels(8, 0);
  const std::vector<double> params(w.values.begin(), w.values.end());
  const auto ref = testing::reference_forward(w.arch, params, x, labels);
  const auto probs = forward(w, x);
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_NEAR(probs(i, 0), ref.probs[i][0], 1e-5);
    EXPECT_NEAR(probs(i, 1), ref.probs[i][1], 1e-5);
  }
}

TEST(Forward, SoftmaxRowsSumToOneProperty) {
  Rng rng(77);
  for (int trial = 0; trial < 40; ++trial) {
    auto w = random_model(64, 100 + static_cast<std::uint64_t>(trial));
    const double scale = std::pow(10.0, rng.uniform(-2.0, 1.5));
    for (auto& v : w.values) v = static_cast<float>(v * scale);
    auto x = random_inputs(4 * 64, rng);
    for (auto& v : x) v = static_cast<float>(v * std::pow(10.0, rng.uniform(-3.0, 3.0)));
    const auto p = forward(w, x);
    for (std::size_t i = 0; i < p.rows; ++i) {
      ASSERT_NEAR(static_cast<double>(p(i, 0)) + p(i, 1), 1.0, 1e-6);
      ASSERT_TRUE(p(i, 0) >= 0.0f && p(i, 0) <= 1.0f);
    }
  }
  const auto w = random_model(64, 5);
  const auto p = forward(w, random_inputs(16 * 64, rng));
  for (float v : p.data) EXPECT_TRUE(v > 0.0f && v < 1.0f);
}

TEST(Forward, ShapeMismatchNamesLength) {
  const auto w = random_model(64, 1);
  try {
    forward(w, std::vector<float>(100));
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("64"), std::string::npos);
  }
  const auto batch = testing::offset_batch(2, 65, 0.1, 1);
  try {
    forward(w, batch);
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("64"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("65"), std::string::npos);
  }
}

TEST(Loss, ZeroModelBalancedLabelsIsLn2) {
  const auto w = ModelWeights::zeros(architecture_for(64));
  Rng rng(4);
  const auto lg = loss_and_grad(w, random_inputs(4 * 64, rng), std::vector<std::uint8_t>{0, 1, 0, 1});
  EXPECT_NEAR(lg.loss, std::log(2.0), 1e-7);
  EXPECT_EQ(lg.grad.size(), w.values.size());
}

TEST(Loss, SaturatedCorrectLogitsGiveZeroLoss) {
  auto w = ModelWeights::zeros(architecture_for(64));
  Rng rng(4);
  const auto x = random_inputs(3 * 64, rng);
  w.tensor(TensorId::OutBias)[1] = 200.0f;
  EXPECT_LT(loss_and_grad(w, x, std::vector<std::uint8_t>{1, 1, 1}).loss, 1e-30);
  EXPECT_GT(loss_and_grad(w, x, std::vector<std::uint8_t>{0, 0, 0}).loss, 100.0);
}

TEST(Loss, NonBinaryLabelIsRejected) {
  const auto w = random_model(64, 1);
  Rng rng(4);
  EXPECT_THROW(loss_and_grad(w, random_inputs(2 * 64, rng), std::vector<std::uint8_t>{0, 2}), ValidationError);
}

struct GradCheckStats {
  std::size_t checked = 0;
  std::size_t skipped = 0;
  double max_rel = 0.0;
};

// Central differences on the reference network. Steps that flip a ReLU or a
// pooling argmax are skipped: the loss is not differentiable across them.
void grad_check(const ModelWeights& w, std::span<const float> x, std::span<const std::uint8_t> labels,
                std::span<const std::size_t> indices, GradCheckStats& stats) {
  const std::vector<double> base(w.values.begin(), w.values.end());
  std::vector<double> analytic(base.size());
  const double loss = evaluate<double>(w.arch, base, x, labels, analytic);
  const auto ref0 = testing::reference_forward(w.arch, base, x, labels);
  ASSERT_NEAR(loss, ref0.loss, 1e-10);
  const double h = 1e-4;
  auto params = base;
  for (std::size_t i : indices) {
    params[i] = base[i] + h;
    const auto up = testing::reference_forward(w.arch, params, x, labels);
    params[i] = base[i] - h;
    const auto down = testing::reference_forward(w.arch, params, x, labels);
    params[i] = base[i];
    if (up.signature != ref0.signature || down.signature != ref0.signature) {
      ++stats.skipped;
      continue;
    }
    const double numeric = (up.loss - down.loss) / (2 * h);
    const double denom = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-7});
    const double rel = std::abs(numeric - analytic[i]) / denom;
    stats.max_rel = std::max(stats.max_rel, rel);
    ++stats.checked;
    EXPECT_LE(rel, 1e-3) << "param " << i << " analytic " << analytic[i] << " numeric " << numeric;
  }
}

TEST(Gradient, EveryParameterOfOneInstance) {
  const auto w = random_model(64, 2024);
  Rng rng(99);
  const auto x = random_inputs(3 * 64, rng);
  const std::vector<std::uint8_t> labels{0, 1, 1};
  std::vector<std::size_t> all(w.values.size());
  std::iota(all.begin(), all.end(), 0);
  GradCheckStats stats;
  grad_check(w, x, labels, all, stats);
  EXPECT_LT(stats.skipped, all.size() / 20);
  EXPECT_LE(stats.max_rel, 1e-3);
}

TEST(Gradient, HundredRandomInstances) {
  const auto start = std::chrono::steady_clock::now();
  GradCheckStats stats;
  Rng rng(31337);
  for (int inst = 0; inst < 120; ++inst) {
    const auto w = random_model(64, derive_seed(7, static_cast<std::uint64_t>(inst)));
    const std::size_t n = 1 + rng.below(4);
    const auto x = random_inputs(n * 64, rng);
    std::vector<std::uint8_t> labels(n);
    for (auto& l : labels) l = static_cast<std::uint8_t>(rng.below(2));
    // A few parameters from every tensor.
    std::vector<std::size_t> idx;
    for (const auto& t : tensor_layout(w.arch)) {
      for (int k = 0; k < 6; ++k) idx.push_back(t.offset + rng.below(t.size));
    }
    grad_check(w, x, labels, idx, stats);
  }
  const auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_GE(stats.checked, 100u * 40);
  EXPECT_LT(stats.skipped * 20, stats.checked);
  EXPECT_LT(secs, 60.0);
}

TEST(Gradient, FloatPathAgreesWithDoublePath) {
  const auto w = random_model(64, 8);
  Rng rng(8);
  const auto x = random_inputs(4 * 64, rng);
  const std::vector<std::uint8_t> labels{1, 0, 0, 1};
  const auto lg = loss_and_grad(w, x, labels);
  const std::vector<double> params(w.values.begin(), w.values.end());
  std::vector<double> g(params.size());
  const double loss = evaluate<double>(w.arch, params, x, labels, g);
  EXPECT_NEAR(lg.loss, loss, 1e-5);
  double scale = 0.0;
  for (double v : g) scale = std::max(scale, std::abs(v));
  for (std::size_t i = 0; i < g.size(); ++i) ASSERT_NEAR(lg.grad[i], g[i], 1e-4 * scale + 1e-7) << i;
}

TEST(Pooling, InvariantToWithinWindowPermutation) {
  Rng rng(6);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t channels = 1 + rng.below(4), len = 2 + rng.below(40);
    std::vector<float> in(channels * len);
    for (auto& v : in) v = static_cast<float>(rng.normal());
    const auto base = max_pool(in, channels, len, 2);
    ASSERT_EQ(base.size(), channels * (len / 2));
    auto permuted = in;
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t q = 0; q + 1 < len; q += 2) {
        if (rng.below(2)) std::swap(permuted[c * len + q], permuted[c * len + q + 1]);
      }
    }
    ASSERT_EQ(max_pool(permuted, channels, len, 2), base);
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t q = 0; q < len / 2; ++q) {
        ASSERT_EQ(base[c * (len / 2) + q], std::max(in[c * len + 2 * q], in[c * len + 2 * q + 1]));
      }
    }
  }
}

TEST(Pooling, GlobalModeCollapsesEachChannel) {
  auto a = architecture_for(64);
  a.pool_mode = PoolMode::Global;
  EXPECT_EQ(a.flat_features(), 8u);
  const auto w = glorot_init(a, 3);
  Rng rng(3);
  const auto p = forward(w, random_inputs(2 * 64, rng));
  EXPECT_EQ(p.rows, 2u);
}

TEST(Init, GlorotBoundsAndZeroBiases) {
  const auto w = glorot_init(architecture_for(640), 17);
  const auto F = static_cast<double>(flat_features_oracle(640));
  const std::pair<TensorId, double> limits[] = {
      {TensorId::Conv1Kernel, std::sqrt(6.0 / (3.0 + 48.0))},
      {TensorId::Conv2Kernel, std::sqrt(6.0 / (48.0 + 24.0))},
      {TensorId::Fc1Weight, std::sqrt(6.0 / (F + 30.0))},
      {TensorId::OutWeight, std::sqrt(6.0 / 32.0)},
  };
  for (const auto& [id, limit] : limits) {
    const auto t = w.tensor(id);
    const auto [lo, hi] = std::minmax_element(t.begin(), t.end());
    EXPECT_GE(*lo, -limit);
    EXPECT_LE(*hi, limit);
    EXPECT_GT(*hi, 0.8 * limit);
  }
  for (auto id : {TensorId::Conv1Bias, TensorId::Conv2Bias, TensorId::Fc1Bias, TensorId::OutBias}) {
    for (float b : w.tensor(id)) EXPECT_EQ(b, 0.0f);
  }
  EXPECT_EQ(glorot_init(architecture_for(640), 17), w);
  EXPECT_NE(glorot_init(architecture_for(640), 18).values, w.values);
}

}  // namespace
}  // namespace cogload::cnn
