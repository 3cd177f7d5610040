#include "cogload/weights_io.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>
#include <sstream>

#include "cogload/error.hpp"
#include "cogload/hashing.hpp"

namespace cogload::cnn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kMagic = "COGLOAD-WEIGHTS 1";

std::string encode_le(std::span<const float> values) {
  std::string out(values.size() * 4, '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(values[i]);
    for (int b = 0; b < 4; ++b) out[i * 4 + static_cast<std::size_t>(b)] = static_cast<char>((bits >> (8 * b)) & 0xFF);
  }
  return out;
}

std::vector<float> decode_le(std::string_view bytes) {
  std::vector<float> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) {
      bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[i * 4 + static_cast<std::size_t>(b)])) << (8 * b);
    }
    out[i] = std::bit_cast<float>(bits);
  }
  return out;
}

json arch_to_json(const Architecture& a) {
  return {{"input_len", a.input_len},
          {"conv1_filters", a.conv1_filters},
          {"conv2_filters", a.conv2_filters},
          {"kernel", a.kernel},
          {"pool", a.pool},
          {"pool_mode", a.pool_mode == PoolMode::Global ? "global" : "window"},
          {"hidden", a.hidden},
          {"classes", a.classes},
          {"flat_features", a.flat_features()}};
}

Architecture arch_from_json(const json& j) {
  Architecture a;
  a.input_len = j.at("input_len").get<std::size_t>();
  a.conv1_filters = j.at("conv1_filters").get<std::size_t>();
  a.conv2_filters = j.at("conv2_filters").get<std::size_t>();
  a.kernel = j.at("kernel").get<std::size_t>();
  a.pool = j.at("pool").get<std::size_t>();
  a.pool_mode = j.at("pool_mode").get<std::string>() == "global" ? PoolMode::Global : PoolMode::Window;
  a.hidden = j.at("hidden").get<std::size_t>();
  a.classes = j.at("classes").get<std::size_t>();
  a.validate();
  if (j.at("flat_features").get<std::size_t>() != a.flat_features()) {
    throw ShapeError("header flat_features disagrees with architecture arithmetic");
  }
  return a;
}

}  // namespace

void save_weights(const ModelWeights& weights, const fs::path& path) {
  const auto layout = tensor_layout(weights.arch);
  if (weights.values.size() != weights.arch.parameter_count()) {
    throw ShapeError("save_weights: value count does not match architecture");
  }
  const std::string blob = encode_le(weights.values);

  json tensors = json::array();
  for (const auto& t : layout) {
    tensors.push_back({{"name", t.name}, {"shape", t.shape}, {"offset", t.offset * 4}, {"bytes", t.size * 4}});
  }
  const auto& m = weights.meta;
  json header = {
      {"format", "cogload-weights"},
      {"architecture", arch_to_json(weights.arch)},
      {"meta",
       {{"window_len_s", m.window_len_s},
        {"fs_hz", m.fs_hz},
        {"task", m.task},
        {"protocol", m.protocol},
        {"run_id", m.run_id},
        {"fold_id", m.fold_id},
        {"seed", m.seed}}},
      {"dtype", "float32-le"},
      {"tensors", tensors},
      {"data_bytes", blob.size()},
      {"sha256", sha256_hex(blob)},
  };

  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << kMagic << '\n' << header.dump() << '\n';
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

ModelWeights load_weights(const fs::path& path, std::optional<double> expected_window_len_s) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open weight file " + path.string());
  std::string magic, header_line;
  if (!std::getline(in, magic) || magic != kMagic) {
    throw ValidationError(path.string() + ": not a cogload weight file");
  }
  if (!std::getline(in, header_line)) throw ChecksumError(path.string() + ": truncated header");
  const std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  json header;
  try {
    header = json::parse(header_line);
  } catch (const json::exception& e) {
    throw ChecksumError(path.string() + ": corrupt header: " + e.what());
  }

  ModelWeights w;
  try {
    w.arch = arch_from_json(header.at("architecture"));
    const auto& m = header.at("meta");
    w.meta.window_len_s = m.at("window_len_s").get<double>();
    w.meta.fs_hz = m.at("fs_hz").get<double>();
    w.meta.task = m.at("task").get<std::string>();
    w.meta.protocol = m.at("protocol").get<std::string>();
    w.meta.run_id = m.at("run_id").get<std::int64_t>();
    w.meta.fold_id = m.at("fold_id").get<std::string>();
    w.meta.seed = m.at("seed").get<std::uint64_t>();

    const auto data_bytes = header.at("data_bytes").get<std::size_t>();
    if (blob.size() != data_bytes) {
      throw ChecksumError(path.string() + ": expected " + std::to_string(data_bytes) + " data bytes, found " +
                          std::to_string(blob.size()));
    }
    if (sha256_hex(blob) != header.at("sha256").get<std::string>()) {
      throw ChecksumError(path.string() + ": checksum mismatch");
    }

    const auto layout = tensor_layout(w.arch);
    const auto& tensors = header.at("tensors");
    if (tensors.size() != layout.size()) throw ShapeError(path.string() + ": unexpected tensor count");
    for (std::size_t i = 0; i < layout.size(); ++i) {
      const auto& t = tensors[i];
      if (t.at("name").get<std::string>() != layout[i].name ||
          t.at("shape").get<std::vector<std::size_t>>() != layout[i].shape ||
          t.at("offset").get<std::size_t>() != layout[i].offset * 4 ||
          t.at("bytes").get<std::size_t>() != layout[i].size * 4) {
        throw ShapeError(path.string() + ": tensor " + std::string(layout[i].name) +
                         " does not match the architecture");
      }
    }
    if (data_bytes != w.arch.parameter_count() * 4) throw ShapeError(path.string() + ": data size mismatch");
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": malformed header: " + e.what());
  }

  if (expected_window_len_s && std::abs(*expected_window_len_s - w.meta.window_len_s) > 1e-9) {
    throw ShapeError(path.string() + ": model was trained on " + std::to_string(w.meta.window_len_s) +
                     " s windows, pipeline expects " + std::to_string(*expected_window_len_s) + " s");
  }
  w.values = decode_le(blob);
  return w;
}

}  // namespace cogload::cnn
