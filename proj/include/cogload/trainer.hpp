#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cogload/cnn.hpp"
#include "cogload/windowing.hpp"

namespace cogload::cnn {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
};

struct AdamState {
  AdamState() = default;
  explicit AdamState(std::size_t n) : m(n, 0.0f), v(n, 0.0f) {}

  std::vector<float> m;
  std::vector<float> v;
  std::int64_t step = 0;
};

/// One Adam update in the Keras formulation:
///   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2,
///   w <- w - lr * sqrt(1-b2^t)/(1-b1^t) * m / (sqrt(v) + eps).
/// Throws NonFiniteError (leaving weights and state untouched) if any
/// gradient entry is not finite.
void adam_step(std::span<float> weights, std::span<const float> grad, AdamState& state,
               double learning_rate, const AdamConfig& config = {});

struct TrainSpec {
  double learning_rate = 1e-3;
  int max_epochs = 200;
  int patience = 10;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  AdamConfig adam;
  bool restore_best = true;

  void validate() const;
};

struct TrainTrace {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  int best_epoch = 0;  // 1-based; 0 when no epoch ran
  int stopped_epoch = 0;
};

struct TrainResult {
  ModelWeights weights;
  TrainTrace trace;
};

/// Mini-batch Adam with seeded shuffling and early stopping on validation
/// loss. An epoch improves when its validation loss is strictly below the best
/// so far; training stops after `patience` epochs without improvement.
TrainResult train(ModelWeights init, const WindowBatch& train_batch, const WindowBatch& val_batch,
                  const TrainSpec& spec);

}  // namespace cogload::cnn
