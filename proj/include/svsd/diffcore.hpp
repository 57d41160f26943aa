// Copyright 2026  The svsd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Differentiable building blocks for the separation network.
//
// Tensors are F x T x C (frequency bins, time frames, channels) stored
// channel-last: element (f, t, c) lives at (f * T + t) * C + c. Kernels are
// kH x kW x Cin x Cout with Cout fastest, so a kernel is directly the
// (kH * kW * Cin) x Cout right-hand side of an im2col GEMM.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace svsd {

struct Shape3 {
  int f = 0;
  int t = 0;
  int c = 0;
  friend bool operator==(const Shape3 &, const Shape3 &) = default;
};

std::string to_string(const Shape3 &s);

template <typename T>
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(int f, int t, int c, T fill = T(0));
  explicit Tensor3(Shape3 s, T fill = T(0)) : Tensor3(s.f, s.t, s.c, fill) {}

  int f() const { return shape_.f; }
  int t() const { return shape_.t; }
  int c() const { return shape_.c; }
  Shape3 shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T &operator()(int f, int t, int c) { return data_[index(f, t, c)]; }
  const T &operator()(int f, int t, int c) const {
    return data_[index(f, t, c)];
  }
  std::size_t index(int f, int t, int c) const {
    return (static_cast<std::size_t>(f) * shape_.t + t) * shape_.c + c;
  }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::vector<T> &storage() { return data_; }
  const std::vector<T> &storage() const { return data_; }

 private:
  Shape3 shape_;
  std::vector<T> data_;
};

template <typename T>
struct LayerParams {
  std::string name;
  int kh = 0;
  int kw = 0;
  int cin = 0;
  int cout = 0;
  std::vector<T> kernel;  // kh * kw * cin * cout
  std::vector<T> bias;    // cout

  std::size_t kernel_index(int i, int j, int ci, int co) const {
    return ((static_cast<std::size_t>(i) * kw + j) * cin + ci) * cout + co;
  }
};

/// Gradient accumulators for one layer, always in double precision.
struct LayerGrad {
  std::vector<double> kernel;
  std::vector<double> bias;
};

using ParamGrads = std::vector<LayerGrad>;

template <typename T>
ParamGrads zero_grads(const std::vector<LayerParams<T>> &layers);

struct Stride {
  int f = 1;
  int t = 1;
};

// ---- forward ops -----------------------------------------------------------

/// Valid (unpadded) cross-correlation plus per-channel bias.
template <typename T>
Tensor3<T> conv2d_valid(const Tensor3<T> &input, const LayerParams<T> &params,
                        Stride stride = {});

/// Transposed convolution; the adjoint of strided conv2d_valid with the
/// kernel's channel axes swapped. Output (F-1)*sF + kH by (T-1)*sT + kW.
template <typename T>
Tensor3<T> conv2d_transposed(const Tensor3<T> &input,
                             const LayerParams<T> &params, Stride stride);

/// 2x2 max-pooling with stride 2. Odd trailing rows/columns are dropped.
/// `argmax` receives the flat input index chosen for each output element.
template <typename T>
Tensor3<T> maxpool2(const Tensor3<T> &input,
                    std::vector<std::size_t> *argmax = nullptr);

template <typename T>
Tensor3<T> leaky_relu(const Tensor3<T> &input, T slope);
template <typename T>
Tensor3<T> relu(const Tensor3<T> &input);
template <typename T>
Tensor3<T> sigmoid(const Tensor3<T> &input);

inline double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

/// Sub-block [f0, f0 + nf) x [t0, t0 + nt), all channels.
template <typename T>
Tensor3<T> slice(const Tensor3<T> &input, int f0, int nf, int t0, int nt);

/// Offsets used by center_crop: the remainder of an odd difference goes to
/// the high-index side.
struct CropOffsets {
  int f = 0;
  int t = 0;
};
CropOffsets center_crop_offsets(Shape3 from, int target_f, int target_t);

template <typename T>
Tensor3<T> center_crop(const Tensor3<T> &input, int target_f, int target_t);

/// Channel concatenation; channels of `a` come first.
template <typename T>
Tensor3<T> concat_channels(const Tensor3<T> &a, const Tensor3<T> &b);

// ---- vector-Jacobian products ----------------------------------------------

template <typename T>
void conv2d_valid_backward(const Tensor3<T> &input, const LayerParams<T> &params,
                           Stride stride, const Tensor3<T> &grad_out,
                           LayerGrad *grad_params, Tensor3<T> *grad_in);

template <typename T>
void conv2d_transposed_backward(const Tensor3<T> &input,
                                const LayerParams<T> &params, Stride stride,
                                const Tensor3<T> &grad_out,
                                LayerGrad *grad_params, Tensor3<T> *grad_in);

// ---- recorded graph --------------------------------------------------------

/// Records a forward pass over a fixed layer list and replays it in reverse
/// to obtain exact gradients. Node ids are returned by every op.
template <typename T>
class Tape {
 public:
  using Node = int;

  explicit Tape(const std::vector<LayerParams<T>> &layers) : layers_(&layers) {}

  /// Inputs receive gradients only when `requires_grad` is set.
  Node input(Tensor3<T> value, bool requires_grad = false);
  Node conv(Node x, int layer, Stride stride = {});
  Node conv_transposed(Node x, int layer, Stride stride);
  Node maxpool(Node x);
  Node leaky_relu(Node x, T slope);
  Node relu(Node x);
  Node sigmoid(Node x);
  Node slice(Node x, int f0, int nf, int t0, int nt);
  Node center_crop(Node x, int target_f, int target_t);
  Node concat(Node a, Node b);

  const Tensor3<T> &value(Node n) const;
  std::size_t size() const { return nodes_.size(); }
  bool recorded() const { return !nodes_.empty(); }
  void clear() { nodes_.clear(); }

  struct Seed {
    Node node;
    Tensor3<T> grad;  // dLoss / dvalue(node)
  };

  /// Accumulates dLoss/dparams into `grads` (which must match the layer
  /// list). Throws if nothing has been recorded.
  void backward(std::span<const Seed> seeds, ParamGrads &grads);

  /// Gradient w.r.t. a node after backward(); empty if it received none.
  const Tensor3<T> &grad(Node n) const;

 private:
  enum class Op {
    kInput, kConv, kConvT, kMaxPool, kLeaky, kRelu, kSigmoid, kSlice, kConcat
  };
  struct Record {
    Op op = Op::kInput;
    Node a = -1;
    Node b = -1;
    int layer = -1;
    Stride stride;
    T slope = T(0);
    bool requires_grad = true;
    int f0 = 0;
    int t0 = 0;
    Tensor3<T> value;
    Tensor3<T> grad;
    std::vector<std::size_t> argmax;
  };

  Node push(Record r);
  void check(Node n) const;

  const std::vector<LayerParams<T>> *layers_;
  std::vector<Record> nodes_;
};

// ---- optimiser ---------------------------------------------------------------

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  long step_count = 0;
  // One moment vector per parameter slot, in slot order.
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

/// A named parameter array. Exactly one of `f32` / `f64` is non-empty.
struct ParamSlot {
  std::string name;
  std::span<float> f32;
  std::span<double> f64;
  std::span<const double> grads;

  std::size_t size() const { return f32.empty() ? f64.size() : f32.size(); }
};

/// One bias-corrected Adam update over all slots; increments step_count.
/// Throws naming the slot if any gradient is NaN or infinite; no parameter
/// is modified in that case.
void adam_step(std::span<const ParamSlot> slots, AdamState &state);

}  // namespace svsd
