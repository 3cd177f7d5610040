#include "cogload/cnn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cogload/error.hpp"
#include "cogload/hashing.hpp"

namespace cogload::cnn {

namespace {

template <typename T>
inline T dot(const T* a, const T* b, std::size_t n) {
  T acc = 0;
#pragma omp simd reduction(+ : acc)
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

template <typename T>
inline void axpy(T alpha, const T* x, T* y, std::size_t n) {
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
inline void relu(T* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] = x[i] > T(0) ? x[i] : T(0);
}

// First maximum wins on ties.
template <typename T>
void pool_forward(const T* in, std::size_t channels, std::size_t len, std::size_t window,
                  T* out, std::uint32_t* argmax) {
  const std::size_t pooled = len / window;
  for (std::size_t c = 0; c < channels; ++c) {
    const T* row = in + c * len;
    for (std::size_t q = 0; q < pooled; ++q) {
      const std::size_t base = q * window;
      T best = row[base];
      std::size_t idx = base;
      for (std::size_t r = 1; r < window; ++r) {
        if (row[base + r] > best) {
          best = row[base + r];
          idx = base + r;
        }
      }
      out[c * pooled + q] = best;
      if (argmax != nullptr) argmax[c * pooled + q] = static_cast<std::uint32_t>(idx);
    }
  }
}

struct Offsets {
  std::size_t w1, b1, w2, b2, wf, bf, wo, bo, total;
};

Offsets offsets_of(const Architecture& a) {
  const auto layout = tensor_layout(a);
  return {layout[0].offset, layout[1].offset, layout[2].offset, layout[3].offset,
          layout[4].offset, layout[5].offset, layout[6].offset, layout[7].offset,
          layout[7].offset + layout[7].size};
}

// Single-example forward/backward with reusable activation buffers.
template <typename T>
class Network {
 public:
  explicit Network(const Architecture& arch)
      : a_(arch),
        off_(offsets_of(arch)),
        L_(arch.input_len),
        L1_(arch.conv1_len()),
        L2_(arch.conv2_len()),
        P_(arch.pooled_len()),
        F_(arch.flat_features()),
        x_(L_),
        a1_(arch.conv1_filters * L1_),
        a2_(arch.conv2_filters * L2_),
        pooled_(F_),
        argmax_(F_),
        h_(arch.hidden),
        z_(arch.classes),
        p_(arch.classes),
        dh_(arch.hidden),
        dp_(F_),
        da2_(a2_.size()),
        da1_(a1_.size()) {}

  // Returns the cross-entropy of `label`; probabilities land in probs().
  double forward(const T* w, const float* input, std::uint8_t label) {
    const std::size_t C1 = a_.conv1_filters, C2 = a_.conv2_filters, K = a_.kernel;
    for (std::size_t i = 0; i < L_; ++i) x_[i] = static_cast<T>(input[i]);

    for (std::size_t c = 0; c < C1; ++c) {
      T* row = a1_.data() + c * L1_;
      std::fill(row, row + L1_, w[off_.b1 + c]);
      for (std::size_t k = 0; k < K; ++k) axpy(w[off_.w1 + c * K + k], x_.data() + k, row, L1_);
      relu(row, L1_);
    }
    for (std::size_t o = 0; o < C2; ++o) {
      T* row = a2_.data() + o * L2_;
      std::fill(row, row + L2_, w[off_.b2 + o]);
      for (std::size_t c = 0; c < C1; ++c) {
        const T* src = a1_.data() + c * L1_;
        for (std::size_t k = 0; k < K; ++k) {
          axpy(w[off_.w2 + (o * C1 + c) * K + k], src + k, row, L2_);
        }
      }
      relu(row, L2_);
    }
    pool_forward(a2_.data(), C2, L2_, a_.pool_window(), pooled_.data(), argmax_.data());

    for (std::size_t u = 0; u < a_.hidden; ++u) {
      const T acc = w[off_.bf + u] + dot(w + off_.wf + u * F_, pooled_.data(), F_);
      h_[u] = acc > T(0) ? acc : T(0);
    }
    T zmax = -std::numeric_limits<T>::infinity();
    for (std::size_t k = 0; k < a_.classes; ++k) {
      z_[k] = w[off_.bo + k] + dot(w + off_.wo + k * a_.hidden, h_.data(), a_.hidden);
      zmax = std::max(zmax, z_[k]);
    }
    T sum = 0;
    for (std::size_t k = 0; k < a_.classes; ++k) {
      p_[k] = std::exp(z_[k] - zmax);
      sum += p_[k];
    }
    for (std::size_t k = 0; k < a_.classes; ++k) p_[k] /= sum;
    return -(static_cast<double>(z_[label]) - static_cast<double>(zmax) -
             std::log(static_cast<double>(sum)));
  }

  // Accumulates scale * d(loss)/d(w) into g. Requires a preceding forward().
  void backward(const T* w, std::uint8_t label, T scale, T* g) {
    const std::size_t C1 = a_.conv1_filters, C2 = a_.conv2_filters, K = a_.kernel, H = a_.hidden;

    std::fill(dh_.begin(), dh_.end(), T(0));
    for (std::size_t k = 0; k < a_.classes; ++k) {
      const T dz = scale * (p_[k] - (k == label ? T(1) : T(0)));
      axpy(dz, h_.data(), g + off_.wo + k * H, H);
      g[off_.bo + k] += dz;
      axpy(dz, w + off_.wo + k * H, dh_.data(), H);
    }

    std::fill(dp_.begin(), dp_.end(), T(0));
    bool any = false;
    for (std::size_t u = 0; u < H; ++u) {
      if (!(h_[u] > T(0))) continue;
      const T d = dh_[u];
      if (d == T(0)) continue;
      any = true;
      axpy(d, pooled_.data(), g + off_.wf + u * F_, F_);
      g[off_.bf + u] += d;
      axpy(d, w + off_.wf + u * F_, dp_.data(), F_);
    }
    if (!any) return;

    std::fill(da2_.begin(), da2_.end(), T(0));
    for (std::size_t o = 0; o < C2; ++o) {
      for (std::size_t q = 0; q < P_; ++q) {
        const std::size_t f = o * P_ + q;
        da2_[o * L2_ + argmax_[f]] += dp_[f];
      }
    }
    for (std::size_t i = 0; i < da2_.size(); ++i) {
      if (!(a2_[i] > T(0))) da2_[i] = T(0);
    }

    std::fill(da1_.begin(), da1_.end(), T(0));
    for (std::size_t o = 0; o < C2; ++o) {
      const T* d = da2_.data() + o * L2_;
      T bsum = 0;
      for (std::size_t j = 0; j < L2_; ++j) bsum += d[j];
      g[off_.b2 + o] += bsum;
      for (std::size_t c = 0; c < C1; ++c) {
        const T* src = a1_.data() + c * L1_;
        for (std::size_t k = 0; k < K; ++k) {
          const std::size_t wi = off_.w2 + (o * C1 + c) * K + k;
          g[wi] += dot(d, src + k, L2_);
          axpy(w[wi], d, da1_.data() + c * L1_ + k, L2_);
        }
      }
    }
    for (std::size_t i = 0; i < da1_.size(); ++i) {
      if (!(a1_[i] > T(0))) da1_[i] = T(0);
    }
    for (std::size_t c = 0; c < C1; ++c) {
      const T* d = da1_.data() + c * L1_;
      T bsum = 0;
      for (std::size_t i = 0; i < L1_; ++i) bsum += d[i];
      g[off_.b1 + c] += bsum;
      for (std::size_t k = 0; k < K; ++k) g[off_.w1 + c * K + k] += dot(d, x_.data() + k, L1_);
    }
  }

  const std::vector<T>& probs() const { return p_; }

 private:
  Architecture a_;
  Offsets off_;
  std::size_t L_, L1_, L2_, P_, F_;
  std::vector<T> x_, a1_, a2_, pooled_;
  std::vector<std::uint32_t> argmax_;
  std::vector<T> h_, z_, p_, dh_, dp_, da2_, da1_;
};

void check_labels(std::span<const std::uint8_t> labels, std::size_t classes) {
  for (auto l : labels) {
    if (l >= classes) throw ValidationError("label " + std::to_string(l) + " is not binary");
  }
}

void check_input(const Architecture& arch, std::size_t input_size, std::size_t rows) {
  if (input_size != rows * arch.input_len) {
    throw ShapeError("input block of " + std::to_string(input_size) + " values is not " +
                     std::to_string(rows) + " rows of L=" + std::to_string(arch.input_len));
  }
}

void check_window(const ModelWeights& w, const WindowBatch& batch) {
  if (batch.length() != w.arch.input_len && !batch.empty()) {
    throw ShapeError("window length mismatch: model expects L=" + std::to_string(w.arch.input_len) +
                     ", batch has L=" + std::to_string(batch.length()));
  }
}

}  // namespace

std::size_t Architecture::parameter_count() const noexcept {
  return conv1_filters * kernel + conv1_filters + conv2_filters * conv1_filters * kernel +
         conv2_filters + hidden * flat_features() + hidden + classes * hidden + classes;
}

void Architecture::validate() const {
  if (kernel == 0 || pool == 0 || conv1_filters == 0 || conv2_filters == 0 || hidden == 0 ||
      classes < 2) {
    throw ShapeError("degenerate architecture");
  }
  if (input_len < 2 * (kernel - 1) + pool_window() || input_len < 2 * kernel) {
    throw ShapeError("input length " + std::to_string(input_len) + " too short for the layer stack");
  }
  if (pooled_len() == 0) throw ShapeError("pooling leaves no features");
}

Architecture architecture_for(std::size_t input_len) {
  Architecture a;
  a.input_len = input_len;
  a.validate();
  return a;
}

std::array<TensorInfo, kTensorCount> tensor_layout(const Architecture& a) {
  std::array<TensorInfo, kTensorCount> t{{
      {"conv1.kernel", {a.conv1_filters, 1, a.kernel}},
      {"conv1.bias", {a.conv1_filters}},
      {"conv2.kernel", {a.conv2_filters, a.conv1_filters, a.kernel}},
      {"conv2.bias", {a.conv2_filters}},
      {"fc1.weight", {a.hidden, a.flat_features()}},
      {"fc1.bias", {a.hidden}},
      {"out.weight", {a.classes, a.hidden}},
      {"out.bias", {a.classes}},
  }};
  std::size_t offset = 0;
  for (auto& info : t) {
    info.size = 1;
    for (auto d : info.shape) info.size *= d;
    info.offset = offset;
    offset += info.size;
  }
  return t;
}

ModelWeights ModelWeights::zeros(const Architecture& arch) {
  arch.validate();
  ModelWeights w;
  w.arch = arch;
  w.values.assign(arch.parameter_count(), 0.0f);
  return w;
}

std::span<float> ModelWeights::tensor(TensorId id) {
  const auto info = tensor_layout(arch)[static_cast<std::size_t>(id)];
  return std::span<float>(values).subspan(info.offset, info.size);
}

std::span<const float> ModelWeights::tensor(TensorId id) const {
  const auto info = tensor_layout(arch)[static_cast<std::size_t>(id)];
  return std::span<const float>(values).subspan(info.offset, info.size);
}

ModelWeights glorot_init(const Architecture& arch, std::uint64_t seed) {
  ModelWeights w = ModelWeights::zeros(arch);
  w.meta.seed = seed;
  Rng rng(seed);
  auto fill = [&](TensorId id, double fan_in, double fan_out) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (float& v : w.tensor(id)) v = static_cast<float>(rng.uniform(-limit, limit));
  };
  const double k = static_cast<double>(arch.kernel);
  fill(TensorId::Conv1Kernel, k, k * static_cast<double>(arch.conv1_filters));
  fill(TensorId::Conv2Kernel, k * static_cast<double>(arch.conv1_filters),
       k * static_cast<double>(arch.conv2_filters));
  fill(TensorId::Fc1Weight, static_cast<double>(arch.flat_features()), static_cast<double>(arch.hidden));
  fill(TensorId::OutWeight, static_cast<double>(arch.hidden), static_cast<double>(arch.classes));
  return w;
}

template <typename T>
double evaluate(const Architecture& arch, std::span<const T> params, std::span<const float> inputs,
                std::span<const std::uint8_t> labels, std::span<T> grad) {
  arch.validate();
  if (params.size() != arch.parameter_count()) throw ShapeError("parameter vector has wrong size");
  if (!grad.empty() && grad.size() != params.size()) throw ShapeError("gradient buffer has wrong size");
  check_input(arch, inputs.size(), labels.size());
  check_labels(labels, arch.classes);
  if (labels.empty()) throw ValidationError("empty batch");

  Network<T> net(arch);
  std::fill(grad.begin(), grad.end(), T(0));
  const T scale = T(1) / static_cast<T>(labels.size());
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    total += net.forward(params.data(), inputs.data() + i * arch.input_len, labels[i]);
    if (!grad.empty()) net.backward(params.data(), labels[i], scale, grad.data());
  }
  return total / static_cast<double>(labels.size());
}

template double evaluate<float>(const Architecture&, std::span<const float>, std::span<const float>,
                                std::span<const std::uint8_t>, std::span<float>);
template double evaluate<double>(const Architecture&, std::span<const double>, std::span<const float>,
                                 std::span<const std::uint8_t>, std::span<double>);

Probabilities forward(const ModelWeights& weights, std::span<const float> inputs) {
  const auto& arch = weights.arch;
  arch.validate();
  if (inputs.size() % arch.input_len != 0) {
    throw ShapeError("input block is not a whole number of rows of L=" + std::to_string(arch.input_len));
  }
  const std::size_t n = inputs.size() / arch.input_len;
  Probabilities out{n, arch.classes, std::vector<float>(n * arch.classes)};
  Network<float> net(arch);
  for (std::size_t i = 0; i < n; ++i) {
    net.forward(weights.values.data(), inputs.data() + i * arch.input_len, 0);
    std::copy(net.probs().begin(), net.probs().end(), out.data.begin() + static_cast<std::ptrdiff_t>(i * arch.classes));
  }
  return out;
}

Probabilities forward(const ModelWeights& weights, const WindowBatch& batch) {
  check_window(weights, batch);
  const auto& arch = weights.arch;
  Probabilities out{batch.size(), arch.classes, std::vector<float>(batch.size() * arch.classes)};
  Network<float> net(arch);
  std::vector<float> row(arch.input_len);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    batch.copy_row(i, row);
    net.forward(weights.values.data(), row.data(), 0);
    std::copy(net.probs().begin(), net.probs().end(), out.data.begin() + static_cast<std::ptrdiff_t>(i * arch.classes));
  }
  return out;
}

std::vector<std::uint8_t> predict(const ModelWeights& weights, const WindowBatch& batch) {
  const auto probs = forward(weights, batch);
  std::vector<std::uint8_t> out(probs.rows);
  for (std::size_t i = 0; i < probs.rows; ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < probs.cols; ++c) {
      if (probs(i, c) > probs(i, best)) best = c;
    }
    out[i] = static_cast<std::uint8_t>(best);
  }
  return out;
}

LossAndGrad loss_and_grad(const ModelWeights& weights, std::span<const float> inputs,
                          std::span<const std::uint8_t> labels) {
  LossAndGrad out;
  out.grad.assign(weights.values.size(), 0.0f);
  out.loss = evaluate<float>(weights.arch, weights.values, inputs, labels, out.grad);
  return out;
}

double mean_loss(const ModelWeights& weights, const WindowBatch& batch) {
  check_window(weights, batch);
  if (batch.empty()) throw ValidationError("mean_loss: empty batch");
  check_labels(batch.labels(), weights.arch.classes);
  Network<float> net(weights.arch);
  std::vector<float> row(weights.arch.input_len);
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    batch.copy_row(i, row);
    total += net.forward(weights.values.data(), row.data(), batch.label(i));
  }
  return total / static_cast<double>(batch.size());
}

std::vector<float> max_pool(std::span<const float> in, std::size_t channels, std::size_t len,
                            std::size_t pool) {
  if (pool == 0 || in.size() != channels * len) throw ShapeError("max_pool: bad shape");
  std::vector<float> out(channels * (len / pool));
  pool_forward(in.data(), channels, len, pool, out.data(), static_cast<std::uint32_t*>(nullptr));
  return out;
}

}  // namespace cogload::cnn
