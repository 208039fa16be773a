// Copyright 2026 The qfold Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Convolutional Q-network: three strided convolutions (16 3x3, 32 5x5,
// 64 3x3, all stride 2, ReLU) followed by a ReLU hidden layer and a linear
// output with one unit per action.
//
// Activations are stored channel-major per sample as a (channels x
// batch*height*width) matrix; a batch of input images is a 1 x (batch*D*D)
// row with pixels in row-major order. Convolutions use TensorFlow-style
// "same" padding, so every layer halves the side length (rounding up).

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "qfold/error.hpp"

namespace qfold {

struct ConvSpec {
  int out_channels;
  int kernel;
  int stride;
};

inline constexpr std::array<ConvSpec, 3> kConvSpecs{{{16, 3, 2}, {32, 5, 2}, {64, 3, 2}}};
inline constexpr int kDefaultHiddenUnits = 256;

template <class Scalar>
class QNetwork {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  struct Layer {
    Matrix weight;
    Vector bias;
  };
  /// conv1, conv2, conv3, hidden, output. Also used to hold gradients.
  using Parameters = std::array<Layer, 5>;

  struct ConvGeometry {
    int in_channels, out_channels, kernel, stride, in_size, out_size, pad;
  };

  /// Intermediate values kept by forward() for backward().
  struct Cache {
    int batch = 0;
    std::array<Matrix, 3> cols;
    std::array<Matrix, 3> conv;  // post-ReLU
    Matrix hidden;               // post-ReLU
    Matrix output;
    // backward() scratch, kept so repeated passes do not reallocate
    Matrix d_hidden, d_flat;
    std::array<Matrix, 3> d_z, d_cols, d_act;
  };

  QNetwork() = default;

  QNetwork(int input_size, int action_count, int hidden_units = kDefaultHiddenUnits)
      : input_size_(input_size), action_count_(action_count), hidden_units_(hidden_units) {
    if (input_size < 1 || action_count < 1 || hidden_units < 1)
      fail(ErrorCode::InvalidArgument, "network dimensions must be positive");
    int size = input_size, channels = 1;
    for (std::size_t i = 0; i < kConvSpecs.size(); ++i) {
      const auto& s = kConvSpecs[i];
      const int out = (size + s.stride - 1) / s.stride;
      const int total_pad = std::max((out - 1) * s.stride + s.kernel - size, 0);
      geometry_[i] = {channels, s.out_channels, s.kernel, s.stride, size, out, total_pad / 2};
      params_[i].weight = Matrix::Zero(s.out_channels, s.kernel * s.kernel * channels);
      params_[i].bias = Vector::Zero(s.out_channels);
      size = out;
      channels = s.out_channels;
    }
    flat_size_ = channels * size * size;
    params_[3].weight = Matrix::Zero(hidden_units, flat_size_);
    params_[3].bias = Vector::Zero(hidden_units);
    params_[4].weight = Matrix::Zero(action_count, hidden_units);
    params_[4].bias = Vector::Zero(action_count);
  }

  int input_size() const { return input_size_; }
  int action_count() const { return action_count_; }
  int hidden_units() const { return hidden_units_; }
  int flat_size() const { return flat_size_; }
  const std::array<ConvGeometry, 3>& geometry() const { return geometry_; }

  Parameters& parameters() { return params_; }
  const Parameters& parameters() const { return params_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : params_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
  }

  bool same_architecture(const QNetwork& o) const {
    if (input_size_ != o.input_size_ || action_count_ != o.action_count_ || hidden_units_ != o.hidden_units_)
      return false;
    for (std::size_t i = 0; i < params_.size(); ++i)
      if (params_[i].weight.rows() != o.params_[i].weight.rows() ||
          params_[i].weight.cols() != o.params_[i].weight.cols())
        return false;
    return true;
  }

  /// Uniform in +-sqrt(6 / (fan_in + fan_out)); biases start at zero.
  void initialize(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      double fan_in = static_cast<double>(params_[i].weight.cols());
      double fan_out = static_cast<double>(params_[i].weight.rows());
      if (i < 3) fan_out *= geometry_[i].kernel * geometry_[i].kernel;
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      std::uniform_real_distribution<double> u(-limit, limit);
      for (Eigen::Index k = 0; k < params_[i].weight.size(); ++k)
        params_[i].weight.data()[k] = static_cast<Scalar>(u(rng));
      params_[i].bias.setZero();
    }
  }

  Matrix forward(const Matrix& input) const {
    Cache cache;
    return forward(input, cache);
  }

  /// `input` is 1 x (batch * D * D); returns actions x batch.
  const Matrix& forward(const Matrix& input, Cache& cache) const {
    const auto pixels = static_cast<Eigen::Index>(input_size_) * input_size_;
    if (input.rows() != 1 || input.cols() == 0 || input.cols() % pixels != 0)
      fail(ErrorCode::DimensionMismatch, "network expects " + std::to_string(input_size_) + "x" +
                                             std::to_string(input_size_) + " observations");
    cache.batch = static_cast<int>(input.cols() / pixels);
    const Matrix* act = &input;
    for (std::size_t i = 0; i < 3; ++i) {
      im2col(*act, geometry_[i], cache.batch, cache.cols[i]);
      cache.conv[i].noalias() = params_[i].weight * cache.cols[i];
      cache.conv[i].colwise() += params_[i].bias;
      cache.conv[i] = cache.conv[i].cwiseMax(Scalar(0));
      act = &cache.conv[i];
    }
    const Eigen::Map<const Matrix> flat(cache.conv[2].data(), flat_size_, cache.batch);
    cache.hidden.noalias() = params_[3].weight * flat;
    cache.hidden.colwise() += params_[3].bias;
    cache.hidden = cache.hidden.cwiseMax(Scalar(0));
    cache.output.noalias() = params_[4].weight * cache.hidden;
    cache.output.colwise() += params_[4].bias;
    return cache.output;
  }

  /// Parameter gradients for an upstream gradient on the outputs.
  Parameters backward(Cache& cache, const Matrix& d_output) const {
    Parameters g;
    backward(cache, d_output, g);
    return g;
  }

  /// As above, writing into `g` and reusing its storage.
  void backward(Cache& cache, const Matrix& d_output, Parameters& g) const {
    g[4].weight.noalias() = d_output * cache.hidden.transpose();
    g[4].bias = d_output.rowwise().sum();
    cache.d_hidden.noalias() = params_[4].weight.transpose() * d_output;
    cache.d_hidden.array() *= relu_mask(cache.hidden);
    const Eigen::Map<const Matrix> flat(cache.conv[2].data(), flat_size_, cache.batch);
    g[3].weight.noalias() = cache.d_hidden * flat.transpose();
    g[3].bias = cache.d_hidden.rowwise().sum();
    cache.d_flat.noalias() = params_[3].weight.transpose() * cache.d_hidden;
    for (int i = 2; i >= 0; --i) {
      const auto k = static_cast<std::size_t>(i);
      // conv3's upstream gradient is d_flat viewed as (channels, batch * pixels)
      const Eigen::Map<const Matrix> d_act(k == 2 ? cache.d_flat.data() : cache.d_act[k + 1].data(),
                                           cache.conv[k].rows(), cache.conv[k].cols());
      cache.d_z[k] = d_act.array() * relu_mask(cache.conv[k]);
      g[k].weight.noalias() = cache.d_z[k] * cache.cols[k].transpose();
      g[k].bias = cache.d_z[k].rowwise().sum();
      if (i == 0) break;
      cache.d_cols[k].noalias() = params_[k].weight.transpose() * cache.d_z[k];
      col2im(cache.d_cols[k], geometry_[k], cache.batch, cache.d_act[k]);
    }
  }

  Parameters zero_like() const {
    Parameters z = params_;
    for (auto& l : z) {
      l.weight.setZero();
      l.bias.setZero();
    }
    return z;
  }

  template <class Other>
  QNetwork<Other> cast() const {
    QNetwork<Other> out(input_size_, action_count_, hidden_units_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      out.parameters()[i].weight = params_[i].weight.template cast<Other>();
      out.parameters()[i].bias = params_[i].bias.template cast<Other>();
    }
    return out;
  }

 private:
  static auto relu_mask(const Matrix& post_relu) {
    return (post_relu.array() > Scalar(0)).template cast<Scalar>();
  }

  // Rows of `cols` are ordered (ky, kx, channel).
  static void im2col(const Matrix& act, const ConvGeometry& g, int batch, Matrix& cols) {
    const Eigen::Index rows = static_cast<Eigen::Index>(g.kernel) * g.kernel * g.in_channels;
    const Eigen::Index n_cols = static_cast<Eigen::Index>(batch) * g.out_size * g.out_size;
    cols.resize(rows, n_cols);
    const Scalar* src = act.data();
    Scalar* dst = cols.data();
    const Eigen::Index in_plane = static_cast<Eigen::Index>(g.in_size) * g.in_size;
    for (int b = 0; b < batch; ++b) {
      for (int oy = 0; oy < g.out_size; ++oy) {
        for (int ox = 0; ox < g.out_size; ++ox) {
          for (int ky = 0; ky < g.kernel; ++ky) {
            const int iy = oy * g.stride + ky - g.pad;
            for (int kx = 0; kx < g.kernel; ++kx) {
              const int ix = ox * g.stride + kx - g.pad;
              if (iy < 0 || iy >= g.in_size || ix < 0 || ix >= g.in_size) {
                std::fill(dst, dst + g.in_channels, Scalar(0));
              } else {
                const Scalar* p = src + (b * in_plane + static_cast<Eigen::Index>(iy) * g.in_size + ix) * g.in_channels;
                std::copy(p, p + g.in_channels, dst);
              }
              dst += g.in_channels;
            }
          }
        }
      }
    }
  }

  static void col2im(const Matrix& cols, const ConvGeometry& g, int batch, Matrix& act) {
    const Eigen::Index in_plane = static_cast<Eigen::Index>(g.in_size) * g.in_size;
    act.resize(g.in_channels, batch * in_plane);
    act.setZero();
    const Scalar* src = cols.data();
    Scalar* dst = act.data();
    for (int b = 0; b < batch; ++b) {
      for (int oy = 0; oy < g.out_size; ++oy) {
        for (int ox = 0; ox < g.out_size; ++ox) {
          for (int ky = 0; ky < g.kernel; ++ky) {
            const int iy = oy * g.stride + ky - g.pad;
            for (int kx = 0; kx < g.kernel; ++kx) {
              const int ix = ox * g.stride + kx - g.pad;
              if (iy >= 0 && iy < g.in_size && ix >= 0 && ix < g.in_size) {
                Scalar* p = dst + (b * in_plane + static_cast<Eigen::Index>(iy) * g.in_size + ix) * g.in_channels;
                for (int c = 0; c < g.in_channels; ++c) p[c] += src[c];
              }
              src += g.in_channels;
            }
          }
        }
      }
    }
  }

  int input_size_ = 0;
  int action_count_ = 0;
  int hidden_units_ = 0;
  int flat_size_ = 0;
  std::array<ConvGeometry, 3> geometry_{};
  Parameters params_{};
};

/// Packs square images into the 1 x (batch*D*D) layout the network reads.
template <class Scalar, class Image>
void pack_observations(std::span<const Image* const> images, int size,
                       Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& out) {
  const Eigen::Index pixels = static_cast<Eigen::Index>(size) * size;
  out.resize(1, pixels * static_cast<Eigen::Index>(images.size()));
  for (std::size_t b = 0; b < images.size(); ++b) {
    const auto& img = *images[b];
    if (img.rows() != size || img.cols() != size)
      fail(ErrorCode::DimensionMismatch, "observation is " + std::to_string(img.rows()) + "x" +
                                             std::to_string(img.cols()) + ", network expects " +
                                             std::to_string(size) + "x" + std::to_string(size));
    Scalar* dst = out.data() + static_cast<Eigen::Index>(b) * pixels;
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) dst[y * size + x] = static_cast<Scalar>(img(y, x));
  }
}

template <class Scalar, class Image>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> pack_observations(std::span<const Image* const> images,
                                                                        int size) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out;
  pack_observations<Scalar, Image>(images, size, out);
  return out;
}

/// Q-values for a single observation.
template <class Scalar, class Image>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> q_forward(const QNetwork<Scalar>& net, const Image& obs) {
  const Image* p = &obs;
  return net.forward(pack_observations<Scalar, Image>(std::span<const Image* const>(&p, 1), net.input_size())).col(0);
}

template <class Scalar>
struct BackwardResult {
  typename QNetwork<Scalar>::Parameters gradients;
  double loss = 0.0;
};

/// Mean squared error between Q(s, a) and the targets over the batch. Only
/// the taken action's output receives gradient. `cache` and `out` are
/// reused across calls.
template <class Scalar>
void q_backward(const QNetwork<Scalar>& net, const typename QNetwork<Scalar>::Matrix& inputs,
                std::span<const int> actions, std::span<const double> targets,
                typename QNetwork<Scalar>::Cache& cache, BackwardResult<Scalar>& out) {
  using Matrix = typename QNetwork<Scalar>::Matrix;
  if (actions.empty() || actions.size() != targets.size())
    fail(ErrorCode::InvalidArgument, "q_backward needs a non-empty batch with one target per action");
  const Matrix& q = net.forward(inputs, cache);
  if (static_cast<std::size_t>(q.cols()) != actions.size())
    fail(ErrorCode::DimensionMismatch, "batch size differs from the number of actions");
  const double n = static_cast<double>(actions.size());
  Matrix d_out = Matrix::Zero(q.rows(), q.cols());
  double loss = 0.0;
  for (std::size_t b = 0; b < actions.size(); ++b) {
    const int a = actions[b];
    if (a < 0 || a >= q.rows()) fail(ErrorCode::InvalidArgument, "action index out of range");
    const double diff = static_cast<double>(q(a, static_cast<Eigen::Index>(b))) - targets[b];
    loss += diff * diff;
    d_out(a, static_cast<Eigen::Index>(b)) = static_cast<Scalar>(2.0 * diff / n);
  }
  net.backward(cache, d_out, out.gradients);
  out.loss = loss / n;
}

template <class Scalar>
BackwardResult<Scalar> q_backward(const QNetwork<Scalar>& net,
                                  const typename QNetwork<Scalar>::Matrix& inputs, std::span<const int> actions,
                                  std::span<const double> targets) {
  typename QNetwork<Scalar>::Cache cache;
  BackwardResult<Scalar> out;
  q_backward(net, inputs, actions, targets, cache, out);
  return out;
}

/// Plain SGD. A positive `max_grad_norm` rescales the whole gradient first.
template <class Scalar>
void sgd_step(QNetwork<Scalar>& net, const typename QNetwork<Scalar>::Parameters& grads, double learning_rate,
              double max_grad_norm = 0.0) {
  double scale = learning_rate;
  if (max_grad_norm > 0.0) {
    double sq = 0.0;
    for (const auto& l : grads) sq += static_cast<double>(l.weight.squaredNorm() + l.bias.squaredNorm());
    const double norm = std::sqrt(sq);
    if (norm > max_grad_norm) scale *= max_grad_norm / norm;
  }
  auto& p = net.parameters();
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i].weight -= static_cast<Scalar>(scale) * grads[i].weight;
    p[i].bias -= static_cast<Scalar>(scale) * grads[i].bias;
  }
}

/// Copies every weight of `net` into `target`.
template <class Scalar>
void sync_target(const QNetwork<Scalar>& net, QNetwork<Scalar>& target) {
  if (!net.same_architecture(target)) fail(ErrorCode::DimensionMismatch, "target network architecture differs");
  target.parameters() = net.parameters();
}

// ---------------------------------------------------------------------------
// Checkpoint layout (all integers uint32, all reals float64, little-endian):
//   "QNET" | version | D | actions | hidden | layer count
//   per layer: rows | cols | weights (row-major) | bias length | bias

inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <class T>
void write_le(std::ostream& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T read_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) fail(ErrorCode::Parse, "truncated checkpoint");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T v;
  std::memcpy(&v, bytes, sizeof(T));
  return v;
}

}  // namespace detail

template <class Scalar>
void save_checkpoint(const QNetwork<Scalar>& net, std::ostream& out) {
  out.write("QNET", 4);
  detail::write_le<std::uint32_t>(out, kCheckpointVersion);
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(net.input_size()));
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(net.action_count()));
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(net.hidden_units()));
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(net.parameters().size()));
  for (const auto& l : net.parameters()) {
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(l.weight.rows()));
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(l.weight.cols()));
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) detail::write_le<double>(out, static_cast<double>(l.weight(r, c)));
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(l.bias.size()));
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) detail::write_le<double>(out, static_cast<double>(l.bias(i)));
  }
  if (!out) fail(ErrorCode::Io, "failed writing checkpoint");
}

template <class Scalar>
QNetwork<Scalar> load_checkpoint(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::string(magic, 4) != "QNET") fail(ErrorCode::Parse, "not a QNET checkpoint");
  const auto version = detail::read_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) fail(ErrorCode::Parse, "unsupported checkpoint version " + std::to_string(version));
  const auto d = detail::read_le<std::uint32_t>(in);
  const auto actions = detail::read_le<std::uint32_t>(in);
  const auto hidden = detail::read_le<std::uint32_t>(in);
  const auto layers = detail::read_le<std::uint32_t>(in);
  QNetwork<Scalar> net(static_cast<int>(d), static_cast<int>(actions), static_cast<int>(hidden));
  if (layers != net.parameters().size()) fail(ErrorCode::Parse, "unexpected layer count in checkpoint");
  for (auto& l : net.parameters()) {
    const auto rows = detail::read_le<std::uint32_t>(in);
    const auto cols = detail::read_le<std::uint32_t>(in);
    if (rows != l.weight.rows() || cols != l.weight.cols()) fail(ErrorCode::Parse, "layer shape mismatch in checkpoint");
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = static_cast<Scalar>(detail::read_le<double>(in));
    const auto n = detail::read_le<std::uint32_t>(in);
    if (n != l.bias.size()) fail(ErrorCode::Parse, "bias length mismatch in checkpoint");
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = static_cast<Scalar>(detail::read_le<double>(in));
  }
  return net;
}

}  // namespace qfold
