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

#include <doctest.h>

#include <cmath>
#include <random>

#include "svsd/diffcore.hpp"
#include "svsd/error.hpp"
#include "test_util.hpp"

using namespace svsd;
using namespace svsd::testing;

namespace {

// Direct loop oracle for strided valid cross-correlation.
Tensor3<double> ConvOracle(const Tensor3<double> &x, const LayerParams<double> &p, Stride s) {
  const int of = (x.f() - p.kh) / s.f + 1, ot = (x.t() - p.kw) / s.t + 1;
  Tensor3<double> y(of, ot, p.cout);
  for (int f = 0; f < of; ++f)
    for (int t = 0; t < ot; ++t)
      for (int co = 0; co < p.cout; ++co) {
        double acc = p.bias[co];
        for (int i = 0; i < p.kh; ++i)
          for (int j = 0; j < p.kw; ++j)
            for (int ci = 0; ci < p.cin; ++ci)
              acc += x(f * s.f + i, t * s.t + j, ci) * p.kernel[p.kernel_index(i, j, ci, co)];
        y(f, t, co) = acc;
      }
  return y;
}

double Dot(const Tensor3<double> &a, const Tensor3<double> &b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.storage()[i] * b.storage()[i];
  return s;
}

double MaxDiff(const Tensor3<double> &a, const Tensor3<double> &b) {
  REQUIRE(a.shape() == b.shape());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a.storage()[i] - b.storage()[i]));
  return m;
}

bool GradClose(double analytic, double numeric, double rel = 1e-4) {
  return std::abs(analytic - numeric) <= rel * std::max(std::abs(analytic), std::abs(numeric)) + 1e-9;
}

LayerParams<double> Identity1x1(int channels) {
  LayerParams<double> p;
  p.kh = p.kw = 1;
  p.cin = p.cout = channels;
  p.kernel.assign(static_cast<std::size_t>(channels) * channels, 0.0);
  p.bias.assign(channels, 0.0);
  for (int c = 0; c < channels; ++c) p.kernel[p.kernel_index(0, 0, c, c)] = 1.0;
  return p;
}

// A small graph touching every op; returns sum(weights * output).
struct ToyGraph {
  std::vector<LayerParams<double>> layers;
  Tensor3<double> input;
  Tensor3<double> weights;

  explicit ToyGraph(std::mt19937_64 &rng) {
    layers.push_back(RandomLayer<double>(rng, 3, 3, 2, 5));  // conv
    layers.push_back(RandomLayer<double>(rng, 2, 2, 5, 3));  // transposed, stride 2
    layers.push_back(RandomLayer<double>(rng, 1, 1, 5, 2));  // head on concat
    input = RandomTensor<double>(rng, 10, 8, 2);
  }

  Tensor3<double> Run(Tape<double> &tape, Tape<double>::Node *in = nullptr) {
    const auto x = tape.input(input, true);
    if (in) *in = x;
    auto h = tape.leaky_relu(tape.conv(x, 0), 0.01);   // 8 x 6 x 5
    auto p = tape.maxpool(h);                          // 4 x 3 x 5
    auto u = tape.relu(tape.conv_transposed(p, 1, {2, 2}));  // 8 x 6 x 3
    auto c = tape.center_crop(x, 8, 6);                // 8 x 6 x 2
    auto cat = tape.concat(u, c);                      // 8 x 6 x 5
    auto s = tape.slice(cat, 1, 6, 0, 5);              // 6 x 5 x 5
    auto out = tape.sigmoid(tape.conv(s, 2));          // 6 x 5 x 2
    return tape.value(out);
  }

  double Loss() {
    Tape<double> tape(layers);
    const auto y = Run(tape);
    if (weights.empty()) {
      std::mt19937_64 rng(99);
      weights = RandomTensor<double>(rng, y.f(), y.t(), y.c());
    }
    return Dot(y, weights);
  }
};

}  // namespace

TEST_SUITE("diffcore") {

TEST_CASE("identity 1x1 convolution") {
  std::mt19937_64 rng(1);
  const auto x = RandomTensor<double>(rng, 6, 5, 3);
  const auto y = conv2d_valid(x, Identity1x1(3));
  CHECK(MaxDiff(x, y) == 0.0);
}

TEST_CASE("valid convolution shapes and loop oracle") {
  std::mt19937_64 rng(2);
  const auto x = RandomTensor<double>(rng, 5, 5, 1);
  CHECK(conv2d_valid(x, RandomLayer<double>(rng, 3, 3, 1, 1)).shape() == Shape3{3, 3, 1});

  const auto small = RandomTensor<double>(rng, 4, 4, 2);
  const auto p = RandomLayer<double>(rng, 3, 3, 2, 3);
  CHECK(MaxDiff(conv2d_valid(small, p), ConvOracle(small, p, {})) < 1e-10);

  // Wider inputs exercise the other kernels of the implementation.
  for (auto [cin, cout] : {std::pair{1, 8}, {2, 16}, {3, 5}, {6, 7}, {17, 2}}) {
    const auto xi = RandomTensor<double>(rng, 13, 11, cin);
    const auto pi = RandomLayer<double>(rng, 5, 5, cin, cout);
    CHECK(MaxDiff(conv2d_valid(xi, pi), ConvOracle(xi, pi, {})) < 1e-10);
    CHECK(MaxDiff(conv2d_valid(xi, pi, {2, 3}), ConvOracle(xi, pi, {2, 3})) < 1e-10);
  }
}

TEST_CASE("float and double convolutions agree") {
  std::mt19937_64 rng(3);
  const auto xd = RandomTensor<double>(rng, 12, 9, 4);
  const auto pd = RandomLayer<double>(rng, 3, 3, 4, 8);
  Tensor3<float> xf(12, 9, 4);
  for (std::size_t i = 0; i < xd.size(); ++i) xf.storage()[i] = static_cast<float>(xd.storage()[i]);
  LayerParams<float> pf;
  pf.kh = pf.kw = 3;
  pf.cin = 4;
  pf.cout = 8;
  pf.kernel.assign(pd.kernel.begin(), pd.kernel.end());
  pf.bias.assign(pd.bias.begin(), pd.bias.end());
  const auto yf = conv2d_valid(xf, pf);
  const auto yd = conv2d_valid(xd, pd);
  for (std::size_t i = 0; i < yd.size(); ++i) CHECK(std::abs(yf.storage()[i] - yd.storage()[i]) < 1e-4);
}

TEST_CASE("transposed convolution shapes and identity") {
  std::mt19937_64 rng(4);
  const auto x = RandomTensor<double>(rng, 18, 10, 3);
  CHECK(conv2d_transposed(x, RandomLayer<double>(rng, 2, 2, 3, 4), {2, 2}).shape() ==
        Shape3{36, 20, 4});
  CHECK(MaxDiff(conv2d_transposed(x, Identity1x1(3), {1, 1}), x) == 0.0);
}

TEST_CASE("transposed convolution is the adjoint of strided convolution") {
  std::mt19937_64 rng(5);
  for (auto [k, s, cin, cout] : {std::tuple{2, 2, 3, 4}, {3, 1, 2, 5}, {3, 2, 4, 4}, {1, 1, 6, 1}}) {
    const int of = 5, ot = 4;
    const int inf = (of - 1) * s + k, int_ = (ot - 1) * s + k;
    auto conv = RandomLayer<double>(rng, k, k, cin, cout);
    std::fill(conv.bias.begin(), conv.bias.end(), 0.0);
    LayerParams<double> adj;
    adj.kh = adj.kw = k;
    adj.cin = cout;
    adj.cout = cin;
    adj.kernel.resize(conv.kernel.size());
    adj.bias.assign(cin, 0.0);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j)
        for (int a = 0; a < cin; ++a)
          for (int b = 0; b < cout; ++b)
            adj.kernel[adj.kernel_index(i, j, b, a)] = conv.kernel[conv.kernel_index(i, j, a, b)];
    const auto x = RandomTensor<double>(rng, inf, int_, cin);
    const auto y = RandomTensor<double>(rng, of, ot, cout);
    const auto cx = conv2d_valid(x, conv, {s, s});
    const auto ty = conv2d_transposed(y, adj, {s, s});
    REQUIRE(ty.shape() == x.shape());
    CHECK(std::abs(Dot(cx, y) - Dot(x, ty)) < 1e-8);
  }
}

TEST_CASE("max pooling") {
  Tensor3<double> c(6, 220, 2, 0.75);
  const auto pc = maxpool2(c);
  CHECK(pc.shape() == Shape3{3, 110, 2});
  for (double v : pc.storage()) CHECK(v == 0.75);

  std::mt19937_64 rng(6);
  const auto x = RandomTensor<double>(rng, 7, 9, 3);
  std::vector<std::size_t> argmax;
  const auto y = maxpool2(x, &argmax);
  CHECK(y.shape() == Shape3{3, 4, 3});
  for (int f = 0; f < 3; ++f)
    for (int t = 0; t < 4; ++t)
      for (int ch = 0; ch < 3; ++ch) {
        const double m = std::max({x(2 * f, 2 * t, ch), x(2 * f + 1, 2 * t, ch),
                                   x(2 * f, 2 * t + 1, ch), x(2 * f + 1, 2 * t + 1, ch)});
        CHECK(y(f, t, ch) == m);
        CHECK(x.storage()[argmax[y.index(f, t, ch)]] == m);
      }
}

TEST_CASE("activations") {
  Tensor3<double> x(1, 3, 1);
  x(0, 0, 0) = -1.0;
  x(0, 1, 0) = 0.0;
  x(0, 2, 0) = 2.0;
  CHECK(leaky_relu(x, 0.01)(0, 0, 0) == doctest::Approx(-0.01));
  CHECK(leaky_relu(x, 0.01)(0, 2, 0) == 2.0);
  CHECK(sigmoid(x)(0, 1, 0) == 0.5);
  CHECK(sigmoid(0.0) == 0.5);
  const auto r = relu(x);
  for (int t = 0; t < 3; ++t) CHECK(r(0, t, 0) == std::max(0.0, x(0, t, 0)));
  CHECK(sigmoid(-800.0) >= 0.0);
  CHECK(sigmoid(800.0) == 1.0);
}

TEST_CASE("center crop offsets") {
  CropOffsets o = center_crop_offsets({40, 24, 1}, 36, 20);
  CHECK(o.f == 2);
  CHECK(o.t == 2);
  o = center_crop_offsets({348, 220, 1}, 258, 130);
  CHECK(o.f == 45);
  CHECK(o.t == 45);
  o = center_crop_offsets({11, 10, 1}, 8, 10);
  CHECK(o.f == 1);
  CHECK(o.t == 0);
  std::mt19937_64 rng(7);
  const auto x = RandomTensor<double>(rng, 9, 7, 2);
  CHECK(MaxDiff(center_crop(x, 9, 7), x) == 0.0);
  CHECK_THROWS_AS(center_crop(x, 10, 7), Error);
}

TEST_CASE("channel concatenation order") {
  Tensor3<double> a(2, 2, 1, 1.0), b(2, 2, 2, 2.0);
  const auto c = concat_channels(a, b);
  CHECK(c.shape() == Shape3{2, 2, 3});
  CHECK(c(1, 1, 0) == 1.0);
  CHECK(c(1, 1, 2) == 2.0);
  CHECK_THROWS_AS(concat_channels(a, Tensor3<double>(3, 2, 1)), Error);
}

TEST_CASE("gradient of half squared norm is the input") {
  std::mt19937_64 rng(8);
  std::vector<LayerParams<double>> none;
  Tape<double> tape(none);
  const auto x = RandomTensor<double>(rng, 3, 4, 2);
  const auto n = tape.input(x, true);
  ParamGrads grads;
  const Tape<double>::Seed seed{n, x};
  tape.backward(std::span(&seed, 1), grads);
  CHECK(MaxDiff(tape.grad(n), x) == 0.0);
}

TEST_CASE("constant loss gives zero gradients") {
  std::mt19937_64 rng(9);
  ToyGraph g(rng);
  Tape<double> tape(g.layers);
  Tape<double>::Node in;
  const auto y = g.Run(tape, &in);
  ParamGrads grads = zero_grads(g.layers);
  const Tape<double>::Seed seed{static_cast<int>(tape.size()) - 1, Tensor3<double>(y.shape())};
  tape.backward(std::span(&seed, 1), grads);
  for (const auto &lg : grads) {
    for (double v : lg.kernel) CHECK(v == 0.0);
    for (double v : lg.bias) CHECK(v == 0.0);
  }
}

TEST_CASE("backward without a recording throws") {
  std::vector<LayerParams<double>> none;
  Tape<double> tape(none);
  ParamGrads grads;
  CHECK_THROWS_AS(tape.backward({}, grads), Error);
}

TEST_CASE("tape gradients match central differences for every op") {
  std::mt19937_64 rng(10);
  ToyGraph g(rng);
  g.Loss();
  Tape<double> tape(g.layers);
  Tape<double>::Node in;
  g.Run(tape, &in);
  ParamGrads grads = zero_grads(g.layers);
  const Tape<double>::Seed seed{static_cast<int>(tape.size()) - 1, g.weights};
  tape.backward(std::span(&seed, 1), grads);
  const Tensor3<double> din = tape.grad(in);

  const double h = 1e-4;
  int checked = 0;
  for (std::size_t l = 0; l < g.layers.size(); ++l) {
    for (std::size_t i = 0; i < g.layers[l].kernel.size(); ++i) {
      const double keep = g.layers[l].kernel[i];
      g.layers[l].kernel[i] = keep + h;
      const double up = g.Loss();
      g.layers[l].kernel[i] = keep - h;
      const double down = g.Loss();
      g.layers[l].kernel[i] = keep;
      CHECK(GradClose(grads[l].kernel[i], (up - down) / (2 * h)));
      ++checked;
    }
    for (std::size_t i = 0; i < g.layers[l].bias.size(); ++i) {
      const double keep = g.layers[l].bias[i];
      g.layers[l].bias[i] = keep + h;
      const double up = g.Loss();
      g.layers[l].bias[i] = keep - h;
      const double down = g.Loss();
      g.layers[l].bias[i] = keep;
      CHECK(GradClose(grads[l].bias[i], (up - down) / (2 * h)));
    }
  }
  for (std::size_t i = 0; i < g.input.size(); i += 3) {
    const double keep = g.input.storage()[i];
    g.input.storage()[i] = keep + h;
    const double up = g.Loss();
    g.input.storage()[i] = keep - h;
    const double down = g.Loss();
    g.input.storage()[i] = keep;
    CHECK(GradClose(din.storage()[i], (up - down) / (2 * h)));
  }
  CHECK(checked > 100);
}

TEST_CASE("forward ops are deterministic") {
  std::mt19937_64 rng(11);
  ToyGraph g(rng);
  Tape<double> a(g.layers), b(g.layers);
  const auto ya = g.Run(a), yb = g.Run(b);
  CHECK(ya.storage() == yb.storage());
}

TEST_CASE("adam: zero gradient leaves parameters alone") {
  std::vector<double> w = {0.5, -1.0};
  std::vector<double> g = {0.0, 0.0};
  ParamSlot slot;
  slot.name = "w";
  slot.f64 = w;
  slot.grads = g;
  AdamState state;
  adam_step(std::span(&slot, 1), state);
  CHECK(w[0] == 0.5);
  CHECK(w[1] == -1.0);
  CHECK(state.step_count == 1);
}

TEST_CASE("adam: first step moves by the learning rate against the gradient") {
  std::vector<double> w = {0.5, -1.0, 2.0};
  std::vector<double> g = {0.3, -7.0, 1e-3};
  ParamSlot slot;
  slot.name = "w";
  slot.f64 = w;
  slot.grads = g;
  AdamState state;
  state.config.learning_rate = 1e-3;
  const std::vector<double> before = w;
  adam_step(std::span(&slot, 1), state);
  for (std::size_t i = 0; i < w.size(); ++i) {
    // m_hat = g, v_hat = g^2 after bias correction.
    const double expect = -1e-3 * g[i] / (std::abs(g[i]) + 1e-8);
    CHECK(w[i] - before[i] == doctest::Approx(expect).epsilon(1e-9));
  }
}

TEST_CASE("adam: two steps on w^2 decrease the objective") {
  std::vector<float> w = {1.0f};
  AdamState state;
  state.config.learning_rate = 0.1;
  for (int step = 0; step < 2; ++step) {
    std::vector<double> g = {2.0 * w[0]};
    ParamSlot slot;
    slot.name = "w";
    slot.f32 = w;
    slot.grads = g;
    const float prev = w[0];
    adam_step(std::span(&slot, 1), state);
    CHECK(w[0] * w[0] < prev * prev);
  }
}

TEST_CASE("adam rejects non-finite gradients without touching parameters") {
  std::vector<double> w = {1.0, 2.0};
  std::vector<double> g = {0.1, std::nan("")};
  ParamSlot slot;
  slot.name = "layer.kernel";
  slot.f64 = w;
  slot.grads = g;
  AdamState state;
  CHECK_THROWS_WITH_AS(adam_step(std::span(&slot, 1), state), doctest::Contains("layer.kernel"),
                       Error);
  CHECK(w[0] == 1.0);
  CHECK(state.step_count == 0);
}

}  // TEST_SUITE
