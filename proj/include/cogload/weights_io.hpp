#pragma once

#include <filesystem>
#include <optional>

#include "cogload/cnn.hpp"

namespace cogload::cnn {

/// Weight file layout:
///   line 1: "COGLOAD-WEIGHTS 1"
///   line 2: one-line JSON header (architecture, meta, tensor table with
///           shapes and byte offsets, data_bytes, sha256 of the blob)
///   rest:   little-endian IEEE-754 float32 tensors in tensor_layout() order
void save_weights(const ModelWeights& weights, const std::filesystem::path& path);

/// Throws ChecksumError on truncation or corruption of the blob and
/// ShapeError when the header disagrees with the architecture arithmetic or
/// with `expected_window_len_s`.
ModelWeights load_weights(const std::filesystem::path& path,
                          std::optional<double> expected_window_len_s = std::nullopt);

}  // namespace cogload::cnn
