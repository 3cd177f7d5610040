#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cogload/cnn.hpp"

namespace cogload::testing {

/// Straight-line double-precision network written from the layer
/// definitions, independent of the library's kernels. `signature` collects
/// every ReLU sign and pooling argmax so callers can tell when a finite
/// difference step crosses a kink.
struct ReferenceResult {
  double loss = 0.0;
  std::vector<std::vector<double>> probs;
  std::vector<std::uint32_t> signature;
};

ReferenceResult reference_forward(const cnn::Architecture& arch, std::span<const double> params,
                                  std::span<const float> inputs, std::span<const std::uint8_t> labels);

}  // namespace cogload::testing
