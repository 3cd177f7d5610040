#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cogload/windowing.hpp"

namespace cogload::cnn {

enum class PoolMode { Window, Global };

/// Shallow 1D CNN:
///   conv(16, k=3) -> ReLU -> conv(8, k=3) -> ReLU -> maxpool(2) -> flatten
///   -> dense(30) -> ReLU -> dense(2) -> softmax
/// Convolutions are stride 1 with valid padding. The flattened feature vector
/// is channel-major (index = channel * pooled_len + position).
struct Architecture {
  std::size_t input_len = 0;
  std::size_t conv1_filters = 16;
  std::size_t conv2_filters = 8;
  std::size_t kernel = 3;
  std::size_t pool = 2;
  PoolMode pool_mode = PoolMode::Window;
  std::size_t hidden = 30;
  std::size_t classes = 2;

  std::size_t conv1_len() const noexcept { return input_len - kernel + 1; }
  std::size_t conv2_len() const noexcept { return conv1_len() - kernel + 1; }
  std::size_t pool_window() const noexcept {
    return pool_mode == PoolMode::Global ? conv2_len() : pool;
  }
  std::size_t pooled_len() const noexcept { return conv2_len() / pool_window(); }
  std::size_t flat_features() const noexcept { return conv2_filters * pooled_len(); }
  std::size_t parameter_count() const noexcept;

  /// Throws ShapeError if the input is too short for the layer stack.
  void validate() const;

  bool operator==(const Architecture&) const = default;
};

Architecture architecture_for(std::size_t input_len);

enum class TensorId : std::size_t {
  Conv1Kernel,
  Conv1Bias,
  Conv2Kernel,
  Conv2Bias,
  Fc1Weight,
  Fc1Bias,
  OutWeight,
  OutBias,
};
inline constexpr std::size_t kTensorCount = 8;

struct TensorInfo {
  std::string_view name;
  std::vector<std::size_t> shape;
  std::size_t offset = 0;  // in elements
  std::size_t size = 0;
};

/// Tensor order and shapes of the flat parameter vector:
///   conv1 kernel [16,1,3], conv1 bias [16], conv2 kernel [8,16,3],
///   conv2 bias [8], fc1 [30,F], fc1 bias [30], out [2,30], out bias [2].
std::array<TensorInfo, kTensorCount> tensor_layout(const Architecture& arch);

struct ModelMeta {
  double window_len_s = 0.0;
  double fs_hz = 64.0;
  std::string task = "cognitive_load";
  std::string protocol;
  std::int64_t run_id = -1;
  std::string fold_id;
  std::uint64_t seed = 0;

  bool operator==(const ModelMeta&) const = default;
};

struct ModelWeights {
  Architecture arch;
  ModelMeta meta;
  std::vector<float> values;

  static ModelWeights zeros(const Architecture& arch);

  std::span<float> tensor(TensorId id);
  std::span<const float> tensor(TensorId id) const;

  bool operator==(const ModelWeights&) const = default;
};

/// Glorot-uniform kernels (fan_in/fan_out include the kernel width), zero biases.
ModelWeights glorot_init(const Architecture& arch, std::uint64_t seed);

/// Row-major probabilities, rows x classes.
struct Probabilities {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  float operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

/// Softmax outputs for a row-major n x L input block.
Probabilities forward(const ModelWeights& weights, std::span<const float> inputs);
Probabilities forward(const ModelWeights& weights, const WindowBatch& batch);

/// argmax class per row (ties resolve to class 0).
std::vector<std::uint8_t> predict(const ModelWeights& weights, const WindowBatch& batch);

struct LossAndGrad {
  double loss = 0.0;
  std::vector<float> grad;
};

/// Mean cross-entropy over the rows and its gradient w.r.t. every parameter.
LossAndGrad loss_and_grad(const ModelWeights& weights, std::span<const float> inputs,
                          std::span<const std::uint8_t> labels);

/// Mean cross-entropy over a whole batch, streamed in chunks.
double mean_loss(const ModelWeights& weights, const WindowBatch& batch);

/// Precision-generic core. `params` follows tensor_layout(arch). When `grad`
/// is non-empty it must have the same size and receives d(mean loss)/d(param)
/// (overwritten). Instantiated for float and double.
template <typename T>
double evaluate(const Architecture& arch, std::span<const T> params, std::span<const float> inputs,
                std::span<const std::uint8_t> labels, std::span<T> grad);

/// Max-pool over a row-major [channels, len] block with window `pool`,
/// stride `pool`; trailing samples that do not fill a window are dropped.
std::vector<float> max_pool(std::span<const float> in, std::size_t channels, std::size_t len,
                            std::size_t pool);

}  // namespace cogload::cnn
