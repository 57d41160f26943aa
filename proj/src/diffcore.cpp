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

#include "svsd/diffcore.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <Eigen/Core>

#include "svsd/error.hpp"

namespace svsd {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ConstMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using MutMap = Eigen::Map<RowMat<T>>;

struct ConvGeometry {
  int out_f;
  int out_t;
  std::size_t rows;  // output positions
  std::size_t cols;  // kh * kw * cin
};

template <typename T>
ConvGeometry ValidGeometry(const Tensor3<T> &in, const LayerParams<T> &p,
                           Stride s, const char *op) {
  const std::string where = std::string(op) + " '" + p.name + "': ";
  Require(s.f >= 1 && s.t >= 1, ErrorCode::kInvalidArgument,
          where + "stride must be >= 1");
  Require(in.c() == p.cin, ErrorCode::kShape,
          where + "input has " + std::to_string(in.c()) +
              " channels, kernel expects " + std::to_string(p.cin));
  Require(in.f() >= p.kh && in.t() >= p.kw, ErrorCode::kShape,
          where + "input " + to_string(in.shape()) + " smaller than kernel " +
              std::to_string(p.kh) + "x" + std::to_string(p.kw));
  ConvGeometry g;
  g.out_f = (in.f() - p.kh) / s.f + 1;
  g.out_t = (in.t() - p.kw) / s.t + 1;
  g.rows = static_cast<std::size_t>(g.out_f) * g.out_t;
  g.cols = static_cast<std::size_t>(p.kh) * p.kw * p.cin;
  return g;
}

// Row (fo, to) of the column matrix is the receptive field of that output:
// kh contiguous runs of kw * cin input values.
template <typename T>
std::vector<T> Im2Col(const Tensor3<T> &in, const LayerParams<T> &p, Stride s,
                      const ConvGeometry &g) {
  std::vector<T> col;
  col.resize(g.rows * g.cols);
  const std::size_t run = static_cast<std::size_t>(p.kw) * p.cin;
  const T *src = in.data().data();
  T *dst = col.data();
  for (int fo = 0; fo < g.out_f; ++fo) {
    for (int to = 0; to < g.out_t; ++to) {
      for (int i = 0; i < p.kh; ++i) {
        const T *from = src + in.index(fo * s.f + i, to * s.t, 0);
        std::copy(from, from + run, dst);
        dst += run;
      }
    }
  }
  return col;
}

template <typename T>
void Col2ImAdd(const std::vector<T> &col, const LayerParams<T> &p, Stride s,
               const ConvGeometry &g, Tensor3<T> &grad_in) {
  const std::size_t run = static_cast<std::size_t>(p.kw) * p.cin;
  const T *src = col.data();
  T *base = grad_in.data().data();
  for (int fo = 0; fo < g.out_f; ++fo) {
    for (int to = 0; to < g.out_t; ++to) {
      for (int i = 0; i < p.kh; ++i) {
        T *dst = base + grad_in.index(fo * s.f + i, to * s.t, 0);
        for (std::size_t k = 0; k < run; ++k) dst[k] += src[k];
        src += run;
      }
    }
  }
}

template <typename T>
void CheckParams(const LayerParams<T> &p) {
  Require(p.kernel.size() ==
                  static_cast<std::size_t>(p.kh) * p.kw * p.cin * p.cout &&
              p.bias.size() == static_cast<std::size_t>(p.cout),
          ErrorCode::kShape, "layer '" + p.name + "': parameter size mismatch");
}

template <typename T>
void AccumulateGrad(const RowMat<T> &src, std::vector<double> &dst) {
  const T *s = src.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += static_cast<double>(s[i]);
}

// Kernel rearranged to Cin x (kh * kw * Cout) for the transposed GEMM.
template <typename T>
RowMat<T> TransposedWeights(const LayerParams<T> &p) {
  const int taps = p.kh * p.kw;
  RowMat<T> w(p.cin, static_cast<Eigen::Index>(taps) * p.cout);
  for (int tap = 0; tap < taps; ++tap)
    for (int ci = 0; ci < p.cin; ++ci)
      for (int co = 0; co < p.cout; ++co)
        w(ci, static_cast<Eigen::Index>(tap) * p.cout + co) =
            p.kernel[(static_cast<std::size_t>(tap) * p.cin + ci) * p.cout + co];
  return w;
}

// Stride-1 convolutions with enough input channels run as one GEMM per
// kernel tap over a shifted view of the input. Rows are "full width"
// positions fo * T_in + t; rows with t >= out_t are computed and discarded.
template <typename T>
bool UseTaps(const LayerParams<T> &p, Stride s) {
  return s.f == 1 && s.t == 1 && p.cin >= 4;
}

template <typename T>
RowMat<T> &Scratch(int slot) {
  thread_local RowMat<T> buffers[2];
  return buffers[slot];
}

template <typename T>
Eigen::Index FullRows(const Tensor3<T> &in, const ConvGeometry &g) {
  return static_cast<Eigen::Index>(g.out_f - 1) * in.t() + g.out_t;
}

template <typename T>
ConstMap<T> TapView(const Tensor3<T> &in, const LayerParams<T> &p, int i, int j,
                    Eigen::Index rows) {
  return ConstMap<T>(in.data().data() + in.index(i, j, 0), rows, p.cin);
}

template <typename T>
ConstMap<T> TapWeights(const LayerParams<T> &p, int i, int j) {
  return ConstMap<T>(p.kernel.data() + p.kernel_index(i, j, 0, 0), p.cin, p.cout);
}

template <typename T>
void TapsForward(const Tensor3<T> &in, const LayerParams<T> &p,
                 const ConvGeometry &g, Tensor3<T> &out) {
  const Eigen::Index rows = FullRows(in, g);
  RowMat<T> &full = Scratch<T>(0);
  full.resize(rows, p.cout);
  for (int i = 0; i < p.kh; ++i) {
    for (int j = 0; j < p.kw; ++j) {
      if (i == 0 && j == 0) {
        full.noalias() = TapView(in, p, i, j, rows) * TapWeights(p, i, j);
      } else {
        full.noalias() += TapView(in, p, i, j, rows) * TapWeights(p, i, j);
      }
    }
  }
  const std::size_t run = static_cast<std::size_t>(g.out_t) * p.cout;
  for (int fo = 0; fo < g.out_f; ++fo)
    std::memcpy(out.data().data() + out.index(fo, 0, 0),
                full.data() + static_cast<std::size_t>(fo) * in.t() * p.cout,
                run * sizeof(T));
}

template <typename T>
void TapsBackward(const Tensor3<T> &in, const LayerParams<T> &p,
                  const ConvGeometry &g, const Tensor3<T> &grad_out,
                  LayerGrad *grad_params, Tensor3<T> *grad_in) {
  const Eigen::Index rows = FullRows(in, g);
  RowMat<T> &full = Scratch<T>(0);
  full.setZero(rows, p.cout);
  const std::size_t run = static_cast<std::size_t>(g.out_t) * p.cout;
  for (int fo = 0; fo < g.out_f; ++fo)
    std::memcpy(full.data() + static_cast<std::size_t>(fo) * in.t() * p.cout,
                grad_out.data().data() + grad_out.index(fo, 0, 0),
                run * sizeof(T));
  if (grad_params) {
    RowMat<T> &dw = Scratch<T>(1);
    for (int i = 0; i < p.kh; ++i) {
      for (int j = 0; j < p.kw; ++j) {
        dw.noalias() = TapView(in, p, i, j, rows).transpose() * full;
        double *dst = grad_params->kernel.data() + p.kernel_index(i, j, 0, 0);
        const T *src = dw.data();
        const std::size_t n = static_cast<std::size_t>(p.cin) * p.cout;
        for (std::size_t k = 0; k < n; ++k) dst[k] += static_cast<double>(src[k]);
      }
    }
    ConstMap<T> dout(grad_out.data().data(), static_cast<Eigen::Index>(g.rows), p.cout);
    const RowMat<T> db = dout.colwise().sum();
    for (int co = 0; co < p.cout; ++co) grad_params->bias[co] += db(0, co);
  }
  if (grad_in) {
    for (int i = 0; i < p.kh; ++i) {
      for (int j = 0; j < p.kw; ++j) {
        MutMap<T> dx(grad_in->data().data() + grad_in->index(i, j, 0), rows, p.cin);
        dx.noalias() += full * TapWeights(p, i, j).transpose();
      }
    }
  }
}

// Inputs with very few channels (the spectrogram itself) make GEMMs with a
// tiny inner dimension; plain loops over the output channels are faster.
template <typename T>
bool UseNarrow(const LayerParams<T> &p, Stride s) {
  return s.f == 1 && s.t == 1 && p.cin < 4;
}

// CO is the output channel count when known at compile time (0 otherwise) so
// the innermost loops vectorise fully.
template <typename T, int CO>
void NarrowForwardImpl(const Tensor3<T> &in, const LayerParams<T> &p,
                       const ConvGeometry &g, Tensor3<T> &out) {
  const int cout = CO > 0 ? CO : p.cout;
  const int cin = p.cin;
  for (int fo = 0; fo < g.out_f; ++fo) {
    T *__restrict orow = out.data().data() + out.index(fo, 0, 0);
    for (int i = 0; i < p.kh; ++i) {
      for (int j = 0; j < p.kw; ++j) {
        for (int ci = 0; ci < cin; ++ci) {
          const T *__restrict x = in.data().data() + in.index(fo + i, j, ci);
          const T *__restrict w = p.kernel.data() + p.kernel_index(i, j, ci, 0);
          for (int to = 0; to < g.out_t; ++to) {
            const T xv = x[static_cast<std::size_t>(to) * cin];
            T *__restrict o = orow + static_cast<std::size_t>(to) * cout;
            for (int co = 0; co < cout; ++co) o[co] += xv * w[co];
          }
        }
      }
    }
  }
}

template <typename T, int CO>
void NarrowBackwardImpl(const Tensor3<T> &in, const LayerParams<T> &p,
                        const ConvGeometry &g, const Tensor3<T> &grad_out,
                        LayerGrad *grad_params, Tensor3<T> *grad_in) {
  const int cout = CO > 0 ? CO : p.cout;
  const int cin = p.cin;
  std::vector<T> row_acc(cout);
  for (int i = 0; i < p.kh; ++i) {
    for (int j = 0; j < p.kw; ++j) {
      for (int ci = 0; ci < cin; ++ci) {
        const T *__restrict w = p.kernel.data() + p.kernel_index(i, j, ci, 0);
        double *dw = grad_params
                         ? grad_params->kernel.data() + p.kernel_index(i, j, ci, 0)
                         : nullptr;
        for (int fo = 0; fo < g.out_f; ++fo) {
          const T *__restrict d = grad_out.data().data() + grad_out.index(fo, 0, 0);
          const std::size_t xoff = in.index(fo + i, j, ci);
          if (dw) {
            const T *__restrict x = in.data().data() + xoff;
            T *__restrict acc = row_acc.data();
            for (int co = 0; co < cout; ++co) acc[co] = T(0);
            for (int to = 0; to < g.out_t; ++to) {
              const T xv = x[static_cast<std::size_t>(to) * cin];
              const T *__restrict dr = d + static_cast<std::size_t>(to) * cout;
              for (int co = 0; co < cout; ++co) acc[co] += xv * dr[co];
            }
            for (int co = 0; co < cout; ++co) dw[co] += static_cast<double>(acc[co]);
          }
          if (grad_in) {
            T *__restrict gx = grad_in->data().data() + xoff;
            for (int to = 0; to < g.out_t; ++to) {
              const T *__restrict dr = d + static_cast<std::size_t>(to) * cout;
              T sum = T(0);
              for (int co = 0; co < cout; ++co) sum += dr[co] * w[co];
              gx[static_cast<std::size_t>(to) * cin] += sum;
            }
          }
        }
      }
    }
  }
  if (grad_params) {
    ConstMap<T> dout(grad_out.data().data(), static_cast<Eigen::Index>(g.rows), p.cout);
    const RowMat<T> db = dout.colwise().sum();
    for (int co = 0; co < p.cout; ++co) grad_params->bias[co] += db(0, co);
  }
}

template <typename T>
void NarrowForward(const Tensor3<T> &in, const LayerParams<T> &p,
                   const ConvGeometry &g, Tensor3<T> &out) {
  switch (p.cout) {
    case 4: return NarrowForwardImpl<T, 4>(in, p, g, out);
    case 8: return NarrowForwardImpl<T, 8>(in, p, g, out);
    case 16: return NarrowForwardImpl<T, 16>(in, p, g, out);
    default: return NarrowForwardImpl<T, 0>(in, p, g, out);
  }
}

template <typename T>
void NarrowBackward(const Tensor3<T> &in, const LayerParams<T> &p,
                    const ConvGeometry &g, const Tensor3<T> &grad_out,
                    LayerGrad *grad_params, Tensor3<T> *grad_in) {
  switch (p.cout) {
    case 4: return NarrowBackwardImpl<T, 4>(in, p, g, grad_out, grad_params, grad_in);
    case 8: return NarrowBackwardImpl<T, 8>(in, p, g, grad_out, grad_params, grad_in);
    case 16: return NarrowBackwardImpl<T, 16>(in, p, g, grad_out, grad_params, grad_in);
    default: return NarrowBackwardImpl<T, 0>(in, p, g, grad_out, grad_params, grad_in);
  }
}

}  // namespace

std::string to_string(const Shape3 &s) {
  return std::to_string(s.f) + "x" + std::to_string(s.t) + "x" +
         std::to_string(s.c);
}

template <typename T>
Tensor3<T>::Tensor3(int f, int t, int c, T fill) : shape_{f, t, c} {
  Require(f >= 0 && t >= 0 && c >= 0, ErrorCode::kShape,
          "negative tensor dimension");
  data_.assign(static_cast<std::size_t>(f) * t * c, fill);
}

template <typename T>
ParamGrads zero_grads(const std::vector<LayerParams<T>> &layers) {
  ParamGrads g(layers.size());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    g[i].kernel.assign(layers[i].kernel.size(), 0.0);
    g[i].bias.assign(layers[i].bias.size(), 0.0);
  }
  return g;
}

template <typename T>
Tensor3<T> conv2d_valid(const Tensor3<T> &input, const LayerParams<T> &p,
                        Stride stride) {
  CheckParams(p);
  const auto g = ValidGeometry(input, p, stride, "conv2d_valid");
  Tensor3<T> out(g.out_f, g.out_t, p.cout);
  MutMap<T> o(out.data().data(), g.rows, p.cout);
  ConstMap<T> w(p.kernel.data(), g.cols, p.cout);
  if (UseTaps(p, stride)) {
    TapsForward(input, p, g, out);
  } else if (UseNarrow(p, stride)) {
    NarrowForward(input, p, g, out);
  } else {
    const auto col = Im2Col(input, p, stride, g);
    o.noalias() = ConstMap<T>(col.data(), g.rows, g.cols) * w;
  }
  Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(p.bias.data(), p.cout);
  o.rowwise() += b;
  return out;
}

template <typename T>
void conv2d_valid_backward(const Tensor3<T> &input, const LayerParams<T> &p,
                           Stride stride, const Tensor3<T> &grad_out,
                           LayerGrad *grad_params, Tensor3<T> *grad_in) {
  CheckParams(p);
  const auto g = ValidGeometry(input, p, stride, "conv2d_valid_backward");
  Require(grad_out.shape() == Shape3{g.out_f, g.out_t, p.cout}, ErrorCode::kShape,
          "conv2d_valid_backward '" + p.name + "': gradient shape mismatch");
  if (grad_in && grad_in->shape() != input.shape())
    *grad_in = Tensor3<T>(input.shape());
  if (UseTaps(p, stride)) {
    TapsBackward(input, p, g, grad_out, grad_params, grad_in);
    return;
  }
  if (UseNarrow(p, stride)) {
    NarrowBackward(input, p, g, grad_out, grad_params, grad_in);
    return;
  }
  ConstMap<T> dout(grad_out.data().data(), g.rows, p.cout);
  const std::vector<T> col = Im2Col(input, p, stride, g);
  ConstMap<T> c(col.data(), g.rows, g.cols);
  if (grad_params) {
    RowMat<T> dw = c.transpose() * dout;
    AccumulateGrad(dw, grad_params->kernel);
    RowMat<T> db = dout.colwise().sum();
    AccumulateGrad(db, grad_params->bias);
  }
  if (grad_in) {
    ConstMap<T> w(p.kernel.data(), g.cols, p.cout);
    std::vector<T> dcol(g.rows * g.cols);
    MutMap<T>(dcol.data(), g.rows, g.cols).noalias() = dout * w.transpose();
    Col2ImAdd(dcol, p, stride, g, *grad_in);
  }
}

template <typename T>
Tensor3<T> conv2d_transposed(const Tensor3<T> &input, const LayerParams<T> &p,
                             Stride s) {
  CheckParams(p);
  Require(s.f >= 1 && s.t >= 1, ErrorCode::kInvalidArgument,
          "conv2d_transposed '" + p.name + "': stride must be >= 1");
  Require(input.c() == p.cin, ErrorCode::kShape,
          "conv2d_transposed '" + p.name + "': input has " +
              std::to_string(input.c()) + " channels, kernel expects " +
              std::to_string(p.cin));
  Require(input.f() >= 1 && input.t() >= 1, ErrorCode::kShape,
          "conv2d_transposed '" + p.name + "': empty input");
  const int out_f = (input.f() - 1) * s.f + p.kh;
  const int out_t = (input.t() - 1) * s.t + p.kw;
  const std::size_t rows = static_cast<std::size_t>(input.f()) * input.t();
  const RowMat<T> w = TransposedWeights(p);
  const RowMat<T> y = ConstMap<T>(input.data().data(), rows, p.cin) * w;

  Tensor3<T> out(out_f, out_t, p.cout);
  T *o = out.data().data();
  for (int f = 0; f < input.f(); ++f) {
    for (int t = 0; t < input.t(); ++t) {
      const T *src = y.data() + (static_cast<std::size_t>(f) * input.t() + t) *
                                    y.cols();
      for (int i = 0; i < p.kh; ++i) {
        for (int j = 0; j < p.kw; ++j) {
          T *dst = o + out.index(f * s.f + i, t * s.t + j, 0);
          const T *blk = src + static_cast<std::size_t>(i * p.kw + j) * p.cout;
          for (int co = 0; co < p.cout; ++co) dst[co] += blk[co];
        }
      }
    }
  }
  MutMap<T> om(o, static_cast<Eigen::Index>(out_f) * out_t, p.cout);
  Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(p.bias.data(), p.cout);
  om.rowwise() += b;
  return out;
}

template <typename T>
void conv2d_transposed_backward(const Tensor3<T> &input,
                                const LayerParams<T> &p, Stride s,
                                const Tensor3<T> &grad_out,
                                LayerGrad *grad_params, Tensor3<T> *grad_in) {
  CheckParams(p);
  const int out_f = (input.f() - 1) * s.f + p.kh;
  const int out_t = (input.t() - 1) * s.t + p.kw;
  Require(grad_out.shape() == Shape3{out_f, out_t, p.cout}, ErrorCode::kShape,
          "conv2d_transposed_backward '" + p.name + "': gradient shape mismatch");
  const std::size_t rows = static_cast<std::size_t>(input.f()) * input.t();
  const std::size_t width = static_cast<std::size_t>(p.kh) * p.kw * p.cout;

  RowMat<T> dy(rows, width);
  for (int f = 0; f < input.f(); ++f) {
    for (int t = 0; t < input.t(); ++t) {
      T *dst = dy.data() + (static_cast<std::size_t>(f) * input.t() + t) * width;
      for (int i = 0; i < p.kh; ++i) {
        for (int j = 0; j < p.kw; ++j) {
          const T *src = grad_out.data().data() +
                         grad_out.index(f * s.f + i, t * s.t + j, 0);
          std::copy(src, src + p.cout,
                    dst + static_cast<std::size_t>(i * p.kw + j) * p.cout);
        }
      }
    }
  }
  ConstMap<T> x(input.data().data(), rows, p.cin);
  if (grad_params) {
    const RowMat<T> dw = x.transpose() * dy;  // cin x (taps * cout)
    const int taps = p.kh * p.kw;
    for (int tap = 0; tap < taps; ++tap)
      for (int ci = 0; ci < p.cin; ++ci)
        for (int co = 0; co < p.cout; ++co)
          grad_params->kernel[(static_cast<std::size_t>(tap) * p.cin + ci) *
                                  p.cout + co] +=
              static_cast<double>(dw(ci, static_cast<Eigen::Index>(tap) * p.cout + co));
    ConstMap<T> dout(grad_out.data().data(),
                     static_cast<Eigen::Index>(out_f) * out_t, p.cout);
    const RowMat<T> db = dout.colwise().sum();
    AccumulateGrad(db, grad_params->bias);
  }
  if (grad_in) {
    if (grad_in->shape() != input.shape()) *grad_in = Tensor3<T>(input.shape());
    const RowMat<T> w = TransposedWeights(p);
    MutMap<T>(grad_in->data().data(), rows, p.cin).noalias() += dy * w.transpose();
  }
}

template <typename T>
Tensor3<T> maxpool2(const Tensor3<T> &input, std::vector<std::size_t> *argmax) {
  const int of = input.f() / 2, ot = input.t() / 2, c = input.c();
  Tensor3<T> out(of, ot, c);
  if (argmax) argmax->assign(out.size(), 0);
  for (int f = 0; f < of; ++f) {
    for (int t = 0; t < ot; ++t) {
      for (int ch = 0; ch < c; ++ch) {
        std::size_t best = input.index(2 * f, 2 * t, ch);
        for (int di = 0; di < 2; ++di)
          for (int dj = 0; dj < 2; ++dj) {
            const std::size_t k = input.index(2 * f + di, 2 * t + dj, ch);
            if (input.data()[k] > input.data()[best]) best = k;
          }
        const std::size_t o = out.index(f, t, ch);
        out.data()[o] = input.data()[best];
        if (argmax) (*argmax)[o] = best;
      }
    }
  }
  return out;
}

template <typename T>
Tensor3<T> leaky_relu(const Tensor3<T> &input, T slope) {
  Tensor3<T> out = input;
  for (T &v : out.data()) v = v > T(0) ? v : v * slope;
  return out;
}

template <typename T>
Tensor3<T> relu(const Tensor3<T> &input) {
  Tensor3<T> out = input;
  for (T &v : out.data()) v = v > T(0) ? v : T(0);
  return out;
}

template <typename T>
Tensor3<T> sigmoid(const Tensor3<T> &input) {
  Tensor3<T> out = input;
  for (T &v : out.data()) v = static_cast<T>(sigmoid(static_cast<double>(v)));
  return out;
}

template <typename T>
Tensor3<T> slice(const Tensor3<T> &input, int f0, int nf, int t0, int nt) {
  Require(f0 >= 0 && t0 >= 0 && nf >= 0 && nt >= 0 && f0 + nf <= input.f() &&
              t0 + nt <= input.t(),
          ErrorCode::kShape,
          "slice out of range for " + to_string(input.shape()));
  Tensor3<T> out(nf, nt, input.c());
  const std::size_t run = static_cast<std::size_t>(nt) * input.c();
  for (int f = 0; f < nf; ++f)
    std::memcpy(out.data().data() + out.index(f, 0, 0),
                input.data().data() + input.index(f0 + f, t0, 0),
                run * sizeof(T));
  return out;
}

CropOffsets center_crop_offsets(Shape3 from, int target_f, int target_t) {
  Require(target_f <= from.f && target_t <= from.t && target_f >= 0 &&
              target_t >= 0,
          ErrorCode::kShape,
          "center_crop: target " + std::to_string(target_f) + "x" +
              std::to_string(target_t) + " larger than input " + to_string(from));
  return {(from.f - target_f) / 2, (from.t - target_t) / 2};
}

template <typename T>
Tensor3<T> center_crop(const Tensor3<T> &input, int target_f, int target_t) {
  const auto off = center_crop_offsets(input.shape(), target_f, target_t);
  return slice(input, off.f, target_f, off.t, target_t);
}

template <typename T>
Tensor3<T> concat_channels(const Tensor3<T> &a, const Tensor3<T> &b) {
  Require(a.f() == b.f() && a.t() == b.t(), ErrorCode::kShape,
          "concat_channels: spatial mismatch " + to_string(a.shape()) + " vs " +
              to_string(b.shape()));
  Tensor3<T> out(a.f(), a.t(), a.c() + b.c());
  const std::size_t positions = static_cast<std::size_t>(a.f()) * a.t();
  T *dst = out.data().data();
  const T *pa = a.data().data();
  const T *pb = b.data().data();
  for (std::size_t i = 0; i < positions; ++i) {
    dst = std::copy(pa + i * a.c(), pa + (i + 1) * a.c(), dst);
    dst = std::copy(pb + i * b.c(), pb + (i + 1) * b.c(), dst);
  }
  return out;
}

// ---- Tape --------------------------------------------------------------------

template <typename T>
typename Tape<T>::Node Tape<T>::push(Record r) {
  nodes_.push_back(std::move(r));
  return static_cast<Node>(nodes_.size()) - 1;
}

template <typename T>
void Tape<T>::check(Node n) const {
  Require(n >= 0 && static_cast<std::size_t>(n) < nodes_.size(), ErrorCode::kState,
          "tape: unknown node " + std::to_string(n));
}

template <typename T>
const Tensor3<T> &Tape<T>::value(Node n) const {
  check(n);
  return nodes_[n].value;
}

template <typename T>
const Tensor3<T> &Tape<T>::grad(Node n) const {
  check(n);
  return nodes_[n].grad;
}

template <typename T>
typename Tape<T>::Node Tape<T>::input(Tensor3<T> value, bool requires_grad) {
  Record r;
  r.op = Op::kInput;
  r.requires_grad = requires_grad;
  r.value = std::move(value);
  return push(std::move(r));
}

template <typename T>
typename Tape<T>::Node Tape<T>::conv(Node x, int layer, Stride stride) {
  check(x);
  Record r;
  r.op = Op::kConv;
  r.a = x;
  r.layer = layer;
  r.stride = stride;
  r.value = conv2d_valid(nodes_[x].value, (*layers_).at(layer), stride);
  return push(std::move(r));
}

template <typename T>
typename Tape<T>::Node Tape<T>::conv_transposed(Node x, int layer, Stride stride) {
  check(x);
  Record r;
  r.op = Op::kConvT;
  r.a = x;
  r.layer = layer;
  r.stride = stride;
  r.value = conv2d_transposed(nodes_[x].value, (*layers_).at(layer), stride);
  return push(std::move(r));
}

template <typename T>
typename Tape<T>::Node Tape<T>::maxpool(Node x) {
  check(x);
  Record r;
  r.op = Op::kMaxPool;
  r.a = x;
  r.value = maxpool2(nodes_[x].value, &r.argmax);
  return push(std::move(r));
}

template <typename T>
typename Tape<T>::Node Tape<T>::leaky_relu(Node x, T slope) {
  check(x);
  Record r;
  r.op = Op::kLeaky;
  r.a = x;
  r.slope = slope;
  r.value = svsd::leaky_relu(nodes_[x].value, slope);
  return push(std::move(r));
}

template <typename T>
typename Tape<T>::Node Tape<T>::relu(Node x) {
  check(x);
  Record r;
  r.op = Op::kRelu;
  r.a = x;
  r.value = svsd::relu(nodes_[x].value);
  return push(std::move(r));
}

template <typename T>
typename Tape<T>::Node Tape<T>::sigmoid(Node x) {
  check(x);
  Record r;
  r.op = Op::kSigmoid;
  r.a = x;
  r.value = svsd::sigmoid(nodes_[x].value);
  return push(std::move(r));
}

template <typename T>
typename Tape<T>::Node Tape<T>::slice(Node x, int f0, int nf, int t0, int nt) {
  check(x);
  Record r;
  r.op = Op::kSlice;
  r.a = x;
  r.f0 = f0;
  r.t0 = t0;
  r.value = svsd::slice(nodes_[x].value, f0, nf, t0, nt);
  return push(std::move(r));
}

template <typename T>
typename Tape<T>::Node Tape<T>::center_crop(Node x, int target_f, int target_t) {
  check(x);
  const auto off = center_crop_offsets(nodes_[x].value.shape(), target_f, target_t);
  return slice(x, off.f, target_f, off.t, target_t);
}

template <typename T>
typename Tape<T>::Node Tape<T>::concat(Node a, Node b) {
  check(a);
  check(b);
  Record r;
  r.op = Op::kConcat;
  r.a = a;
  r.b = b;
  r.value = concat_channels(nodes_[a].value, nodes_[b].value);
  return push(std::move(r));
}

template <typename T>
void Tape<T>::backward(std::span<const Seed> seeds, ParamGrads &grads) {
  Require(recorded(), ErrorCode::kState,
          "backward called before a forward pass was recorded");
  Require(grads.size() == layers_->size(), ErrorCode::kShape,
          "backward: gradient buffer does not match the layer list");
  for (auto &n : nodes_) n.grad = Tensor3<T>();
  for (const auto &s : seeds) {
    check(s.node);
    auto &n = nodes_[s.node];
    Require(s.grad.shape() == n.value.shape(), ErrorCode::kShape,
            "backward: seed shape " + to_string(s.grad.shape()) +
                " does not match node " + to_string(n.value.shape()));
    if (n.grad.empty()) {
      n.grad = s.grad;
    } else {
      for (std::size_t i = 0; i < n.grad.size(); ++i)
        n.grad.data()[i] += s.grad.data()[i];
    }
  }

  auto ensure = [this](Node id) -> Tensor3<T> & {
    auto &g = nodes_[id].grad;
    if (g.shape() != nodes_[id].value.shape() || g.empty())
      g = Tensor3<T>(nodes_[id].value.shape());
    return g;
  };
  auto wants = [this](Node id) { return nodes_[id].requires_grad; };

  for (Node id = static_cast<Node>(nodes_.size()) - 1; id >= 0; --id) {
    Record &n = nodes_[id];
    if (n.grad.empty() || n.op == Op::kInput) continue;
    const Tensor3<T> &g = n.grad;
    switch (n.op) {
      case Op::kConv: {
        Tensor3<T> *gi = wants(n.a) ? &ensure(n.a) : nullptr;
        conv2d_valid_backward(nodes_[n.a].value, (*layers_)[n.layer], n.stride, g,
                              &grads[n.layer], gi);
        break;
      }
      case Op::kConvT: {
        Tensor3<T> *gi = wants(n.a) ? &ensure(n.a) : nullptr;
        conv2d_transposed_backward(nodes_[n.a].value, (*layers_)[n.layer],
                                   n.stride, g, &grads[n.layer], gi);
        break;
      }
      case Op::kMaxPool: {
        if (!wants(n.a)) break;
        Tensor3<T> &gi = ensure(n.a);
        for (std::size_t i = 0; i < g.size(); ++i)
          gi.data()[n.argmax[i]] += g.data()[i];
        break;
      }
      case Op::kLeaky:
      case Op::kRelu: {
        if (!wants(n.a)) break;
        Tensor3<T> &gi = ensure(n.a);
        const T neg = n.op == Op::kLeaky ? n.slope : T(0);
        const auto &x = nodes_[n.a].value;
        for (std::size_t i = 0; i < g.size(); ++i)
          gi.data()[i] += g.data()[i] * (x.data()[i] > T(0) ? T(1) : neg);
        break;
      }
      case Op::kSigmoid: {
        if (!wants(n.a)) break;
        Tensor3<T> &gi = ensure(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) {
          const T y = n.value.data()[i];
          gi.data()[i] += g.data()[i] * y * (T(1) - y);
        }
        break;
      }
      case Op::kSlice: {
        if (!wants(n.a)) break;
        Tensor3<T> &gi = ensure(n.a);
        const std::size_t run = static_cast<std::size_t>(g.t()) * g.c();
        for (int f = 0; f < g.f(); ++f) {
          T *dst = gi.data().data() + gi.index(n.f0 + f, n.t0, 0);
          const T *src = g.data().data() + g.index(f, 0, 0);
          for (std::size_t k = 0; k < run; ++k) dst[k] += src[k];
        }
        break;
      }
      case Op::kConcat: {
        Tensor3<T> *ga = wants(n.a) ? &ensure(n.a) : nullptr;
        Tensor3<T> *gb = wants(n.b) ? &ensure(n.b) : nullptr;
        const int ca = nodes_[n.a].value.c(), cb = nodes_[n.b].value.c();
        const std::size_t positions = static_cast<std::size_t>(g.f()) * g.t();
        for (std::size_t p = 0; p < positions; ++p) {
          const T *src = g.data().data() + p * (ca + cb);
          if (ga) {
            T *da = ga->data().data() + p * ca;
            for (int c = 0; c < ca; ++c) da[c] += src[c];
          }
          if (gb) {
            T *db = gb->data().data() + p * cb;
            for (int c = 0; c < cb; ++c) db[c] += src[ca + c];
          }
        }
        break;
      }
      case Op::kInput:
        break;
    }
    // Intermediate gradients are no longer needed once propagated.
    if (nodes_[id].op != Op::kInput) nodes_[id].grad = Tensor3<T>();
  }
}

// ---- Adam --------------------------------------------------------------------

void adam_step(std::span<const ParamSlot> slots, AdamState &state) {
  for (const auto &s : slots) {
    Require(s.grads.size() == s.size(), ErrorCode::kShape,
            "adam_step: gradient size mismatch for '" + std::string(s.name) + "'");
    for (double g : s.grads)
      Require(std::isfinite(g), ErrorCode::kNumeric,
              "adam_step: non-finite gradient in parameter '" +
                  std::string(s.name) + "'");
  }
  if (state.first_moment.empty()) {
    for (const auto &s : slots) {
      state.first_moment.emplace_back(s.size(), 0.0);
      state.second_moment.emplace_back(s.size(), 0.0);
    }
  }
  Require(state.first_moment.size() == slots.size(), ErrorCode::kShape,
          "adam_step: optimiser state does not match the parameter list");

  const auto &c = state.config;
  state.step_count += 1;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step_count));
  for (std::size_t k = 0; k < slots.size(); ++k) {
    const auto &s = slots[k];
    auto &m = state.first_moment[k];
    auto &v = state.second_moment[k];
    Require(m.size() == s.size(), ErrorCode::kShape,
            "adam_step: moment size mismatch for '" + std::string(s.name) + "'");
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double g = s.grads[i];
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
      const double update =
          c.learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + c.epsilon);
      if (s.f32.empty()) {
        s.f64[i] -= update;
      } else {
        s.f32[i] = static_cast<float>(s.f32[i] - update);
      }
    }
  }
}

#define SVSD_INSTANTIATE(T)                                                    \
  template class Tensor3<T>;                                                   \
  template class Tape<T>;                                                      \
  template ParamGrads zero_grads(const std::vector<LayerParams<T>> &);         \
  template Tensor3<T> conv2d_valid(const Tensor3<T> &, const LayerParams<T> &, \
                                   Stride);                                    \
  template Tensor3<T> conv2d_transposed(const Tensor3<T> &,                    \
                                        const LayerParams<T> &, Stride);       \
  template void conv2d_valid_backward(const Tensor3<T> &,                      \
                                      const LayerParams<T> &, Stride,          \
                                      const Tensor3<T> &, LayerGrad *,         \
                                      Tensor3<T> *);                           \
  template void conv2d_transposed_backward(const Tensor3<T> &,                 \
                                           const LayerParams<T> &, Stride,     \
                                           const Tensor3<T> &, LayerGrad *,    \
                                           Tensor3<T> *);                      \
  template Tensor3<T> maxpool2(const Tensor3<T> &, std::vector<std::size_t> *); \
  template Tensor3<T> leaky_relu(const Tensor3<T> &, T);                       \
  template Tensor3<T> relu(const Tensor3<T> &);                                \
  template Tensor3<T> sigmoid(const Tensor3<T> &);                             \
  template Tensor3<T> slice(const Tensor3<T> &, int, int, int, int);           \
  template Tensor3<T> center_crop(const Tensor3<T> &, int, int);               \
  template Tensor3<T> concat_channels(const Tensor3<T> &, const Tensor3<T> &);

SVSD_INSTANTIATE(float)
SVSD_INSTANTIATE(double)

}  // namespace svsd
