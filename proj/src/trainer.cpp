#include "cogload/trainer.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <limits>
#include <numeric>

#include "cogload/error.hpp"
#include "cogload/hashing.hpp"

namespace cogload::cnn {

void TrainSpec::validate() const {
  if (!(learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
  if (patience < 1) throw ValidationError("patience must be at least 1");
  if (batch_size < 1) throw ValidationError("batch size must be at least 1");
  if (max_epochs < 0) throw ValidationError("max_epochs must be non-negative");
}

TrainResult train(ModelWeights init, const WindowBatch& train_batch, const WindowBatch& val_batch,
                  const TrainSpec& spec) {
  spec.validate();
  TrainResult result{std::move(init), {}};
  if (spec.max_epochs == 0) return result;
  if (train_batch.empty() || val_batch.empty()) {
    throw ValidationError("training needs non-empty training and validation batches");
  }
  const std::size_t L = result.weights.arch.input_len;
  if (train_batch.length() != L || val_batch.length() != L) {
    throw ShapeError("window length mismatch: model expects L=" + std::to_string(L) +
                     ", batches have L=" + std::to_string(train_batch.length()) + "/" +
                     std::to_string(val_batch.length()));
  }

  ModelWeights& weights = result.weights;
  TrainTrace& trace = result.trace;
  AdamState state(weights.values.size());
  Rng rng(derive_seed(spec.seed, "shuffle"));

  std::vector<std::size_t> order(train_batch.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<float> inputs;
  std::vector<std::uint8_t> labels;
  std::vector<float> grad(weights.values.size());

  ModelWeights best = weights;
  double best_val = std::numeric_limits<double>::infinity();
  int wait = 0;

  for (int epoch = 1; epoch <= spec.max_epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += spec.batch_size) {
      const std::size_t n = std::min(spec.batch_size, order.size() - begin);
      inputs.resize(n * L);
      labels.resize(n);
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t idx = order[begin + k];
        train_batch.copy_row(idx, std::span<float>(inputs).subspan(k * L, L));
        labels[k] = train_batch.label(idx);
      }
      const double loss = evaluate<float>(weights.arch, weights.values, inputs, labels, grad);
      if (!std::isfinite(loss)) throw NonFiniteError("non-finite training loss at epoch " + std::to_string(epoch));
      adam_step(weights.values, grad, state, spec.learning_rate, spec.adam);
      epoch_loss += loss * static_cast<double>(n);
    }
    trace.train_loss.push_back(epoch_loss / static_cast<double>(order.size()));

    const double val = mean_loss(weights, val_batch);
    if (!std::isfinite(val)) throw NonFiniteError("non-finite validation loss at epoch " + std::to_string(epoch));
    trace.val_loss.push_back(val);
    trace.stopped_epoch = epoch;
    spdlog::debug("epoch {} train_loss={:.6f} val_loss={:.6f}", epoch, trace.train_loss.back(), val);

    if (val < best_val) {
      best_val = val;
      trace.best_epoch = epoch;
      best.values = weights.values;
      wait = 0;
    } else if (++wait >= spec.patience) {
      break;
    }
  }
  if (spec.restore_best && trace.best_epoch > 0) weights.values = std::move(best.values);
  return result;
}

}  // namespace cogload::cnn
