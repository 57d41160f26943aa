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

#include "svsd/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "svsd/error.hpp"

namespace svsd {
namespace {

struct ChainResult {
  ShapeChain chain;
  bool odd_pooling = false;
};

Shape3 ConvShape(Shape3 in, int kh, int kw, int cout, const std::string &layer) {
  Require(in.f >= kh && in.t >= kw, ErrorCode::kShape,
          "layer '" + layer + "': input " + to_string(in) +
              " is smaller than its " + std::to_string(kh) + "x" +
              std::to_string(kw) + " kernel");
  return {in.f - kh + 1, in.t - kw + 1, cout};
}

ChainResult ComputeChain(const NetworkConfig &c) {
  Require(c.base_channels >= 1, ErrorCode::kInvalidArgument,
          "network config: base_channels must be >= 1");
  Require(c.depth >= 1 && c.depth <= 8, ErrorCode::kInvalidArgument,
          "network config: depth must be in [1, 8]");
  Require(c.num_sources >= 1, ErrorCode::kInvalidArgument,
          "network config: num_sources must be >= 1");
  Require(c.fft_bins >= 2, ErrorCode::kInvalidArgument,
          "network config: fft_bins must be >= 2");
  Require(c.padded_bins >= c.fft_bins, ErrorCode::kInvalidArgument,
          "network config: padded_bins must be >= fft_bins");
  Require(c.input_frames >= 1, ErrorCode::kInvalidArgument,
          "network config: input_frames must be >= 1");
  Require(c.leaky_slope >= 0.0 && c.leaky_slope < 1.0,
          ErrorCode::kInvalidArgument,
          "network config: leaky_slope must be in [0, 1)");

  ChainResult r;
  ShapeChain &s = r.chain;
  auto channels = [&](int level) { return c.base_channels << level; };

  s.input = {c.padded_bins, c.input_frames, 1};
  s.down.push_back(ConvShape(s.input, 3, 3, channels(0), "enc0"));
  for (int l = 1; l <= c.depth; ++l) {
    const Shape3 prev = s.down.back();
    if (prev.f % 2 || prev.t % 2) r.odd_pooling = true;
    const Shape3 pooled{prev.f / 2, prev.t / 2, prev.c};
    const std::string name = "down" + std::to_string(l);
    Require(pooled.f >= 1 && pooled.t >= 1, ErrorCode::kShape,
            "layer '" + name + "': pooling empties the " + to_string(prev) +
                " feature map");
    s.down.push_back(ConvShape(pooled, 3, 3, channels(l), name));
  }
  const Shape3 bottleneck = s.down.back();
  s.collapsed = ConvShape(bottleneck, bottleneck.f, 1, bottleneck.c, "collapse");
  s.expanded = {bottleneck.f, s.collapsed.t, bottleneck.c};

  Shape3 h{bottleneck.f, bottleneck.t, 2 * bottleneck.c};
  for (int k = 1; k <= c.depth; ++k) {
    const int level = c.depth - k;
    const std::string name = "up" + std::to_string(k);
    const Shape3 up{(h.f - 1) * 2 + 2, (h.t - 1) * 2 + 2, channels(level)};
    const Shape3 skip = s.down[level];
    Require(skip.f >= up.f && skip.t >= up.t, ErrorCode::kShape,
            "layer '" + name + ".deconv': upsampled map " + to_string(up) +
                " exceeds the skip connection " + to_string(skip));
    h = ConvShape({up.f, up.t, 2 * channels(level)}, 3, 3, channels(level),
                  name + ".conv");
    s.up.push_back(h);
  }
  Require(s.input.f >= h.f && s.input.t >= h.t, ErrorCode::kShape,
          "layer 'input_crop': output map " + to_string(h) +
              " exceeds the input " + to_string(s.input));
  s.features = {h.f, h.t, c.base_channels + 1};
  s.output_bins = h.f;
  s.output_frames = h.t;
  s.frame_offset = (s.input.t - h.t) / 2;
  s.bin_offset = (s.input.f - h.f) / 2;
  Require(s.output_bins >= c.fft_bins, ErrorCode::kShape,
          "layer 'mask': network emits " + std::to_string(s.output_bins) +
              " bins but " + std::to_string(c.fft_bins) +
              " are required; increase padded_bins");
  return r;
}

template <typename T>
LayerParams<T> MakeLayer(std::string name, int kh, int kw, int cin, int cout,
                         std::mt19937_64 &rng) {
  LayerParams<T> p;
  p.name = std::move(name);
  p.kh = kh;
  p.kw = kw;
  p.cin = cin;
  p.cout = cout;
  const double fan_in = static_cast<double>(kh) * kw * cin;
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / fan_in));
  p.kernel.resize(static_cast<std::size_t>(kh) * kw * cin * cout);
  for (T &w : p.kernel) w = static_cast<T>(normal(rng));
  p.bias.assign(cout, T(0));
  return p;
}

std::string UpName(int k, const char *suffix) {
  return "up" + std::to_string(k) + "." + suffix;
}

}  // namespace

ShapeChain shape_chain(const NetworkConfig &config) {
  return ComputeChain(config).chain;
}

int derive_padded_bins(const NetworkConfig &config) {
  NetworkConfig c = config;
  for (int p = config.fft_bins; p <= 8 * config.fft_bins + 64; ++p) {
    c.padded_bins = p;
    try {
      auto r = ComputeChain(c);
      if (!r.odd_pooling) return p;
    } catch (const Error &) {
    }
  }
  Fail(ErrorCode::kShape, "no padded bin count yields a valid shape chain");
}

template <typename T>
int ParameterSet<T>::layer_index(std::string_view name) const {
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (layers[i].name == name) return static_cast<int>(i);
  Fail(ErrorCode::kInvalidArgument, "unknown layer '" + std::string(name) + "'");
}

template <typename T>
ParameterSet<T> build(const NetworkConfig &config, std::uint64_t seed) {
  const ShapeChain chain = shape_chain(config);
  std::mt19937_64 rng(seed);
  ParameterSet<T> ps;
  ps.config = config;
  ps.seed = seed;
  auto ch = [&](int level) { return config.base_channels << level; };

  ps.layers.push_back(MakeLayer<T>("enc0", 3, 3, 1, ch(0), rng));
  for (int l = 1; l <= config.depth; ++l)
    ps.layers.push_back(
        MakeLayer<T>("down" + std::to_string(l), 3, 3, ch(l - 1), ch(l), rng));
  const Shape3 b = chain.down.back();
  ps.layers.push_back(MakeLayer<T>("collapse", b.f, 1, b.c, b.c, rng));
  ps.layers.push_back(MakeLayer<T>("expand", b.f, 1, b.c, b.c, rng));
  for (int k = 1; k <= config.depth; ++k) {
    const int level = config.depth - k;
    const int in_ch = k == 1 ? 2 * b.c : ch(level + 1);
    ps.layers.push_back(MakeLayer<T>(UpName(k, "deconv"), 2, 2, in_ch, ch(level), rng));
    ps.layers.push_back(
        MakeLayer<T>(UpName(k, "conv"), 3, 3, 2 * ch(level), ch(level), rng));
  }
  const int feat = chain.features.c;
  ps.layers.push_back(MakeLayer<T>("mask", 1, 1, feat, config.num_sources, rng));
  ps.layers.push_back(MakeLayer<T>("detect", chain.output_bins, 1, feat, 1, rng));
  return ps;
}

template <typename To, typename From>
ParameterSet<To> cast_parameters(const ParameterSet<From> &params) {
  ParameterSet<To> out;
  out.config = params.config;
  out.seed = params.seed;
  out.log_sigma = params.log_sigma;
  for (const auto &l : params.layers) {
    LayerParams<To> p;
    p.name = l.name;
    p.kh = l.kh;
    p.kw = l.kw;
    p.cin = l.cin;
    p.cout = l.cout;
    p.kernel.assign(l.kernel.begin(), l.kernel.end());
    p.bias.assign(l.bias.begin(), l.bias.end());
    out.layers.push_back(std::move(p));
  }
  return out;
}

template <typename T>
ModelOutput forward(const ParameterSet<T> &params, const FrameMatrix &mixture,
                    ForwardRecord<T> *record) {
  const NetworkConfig &c = params.config;
  const ShapeChain chain = shape_chain(c);
  Require(mixture.rows() == c.fft_bins && mixture.cols() == c.input_frames,
          ErrorCode::kShape,
          "forward: expected " + std::to_string(c.fft_bins) + "x" +
              std::to_string(c.input_frames) + " input, got " +
              std::to_string(mixture.rows()) + "x" +
              std::to_string(mixture.cols()));

  ForwardRecord<T> local(params);
  ForwardRecord<T> &rec = record ? *record : local;
  Tape<T> &tape = rec.tape;
  tape.clear();
  const T slope = static_cast<T>(c.leaky_slope);

  Tensor3<T> x(c.padded_bins, c.input_frames, 1);
  for (int f = 0; f < c.fft_bins; ++f)
    for (int t = 0; t < c.input_frames; ++t) x(f, t, 0) = static_cast<T>(mixture(f, t));
  rec.input = tape.input(std::move(x));

  std::vector<typename Tape<T>::Node> skips;
  auto h = tape.relu(tape.conv(rec.input, params.layer_index("enc0")));
  skips.push_back(h);
  for (int l = 1; l <= c.depth; ++l) {
    h = tape.leaky_relu(
        tape.conv(tape.maxpool(h), params.layer_index("down" + std::to_string(l))),
        slope);
    skips.push_back(h);
  }
  const auto bottleneck = h;
  auto collapsed = tape.leaky_relu(tape.conv(bottleneck, params.layer_index("collapse")), slope);
  auto expanded = tape.leaky_relu(
      tape.conv_transposed(collapsed, params.layer_index("expand"), {1, 1}), slope);
  h = tape.concat(expanded, bottleneck);
  for (int k = 1; k <= c.depth; ++k) {
    const int level = c.depth - k;
    auto up = tape.leaky_relu(
        tape.conv_transposed(h, params.layer_index(UpName(k, "deconv")), {2, 2}), slope);
    const Shape3 us = tape.value(up).shape();
    auto skip = tape.center_crop(skips[level], us.f, us.t);
    h = tape.leaky_relu(
        tape.conv(tape.concat(up, skip), params.layer_index(UpName(k, "conv"))), slope);
  }
  const Shape3 base = tape.value(h).shape();
  auto features = tape.concat(h, tape.center_crop(rec.input, base.f, base.t));

  auto mask_full = tape.sigmoid(tape.conv(features, params.layer_index("mask")));
  rec.masks = tape.slice(mask_full, 0, c.fft_bins, 0, base.t);
  rec.prob_logits = tape.conv(features, params.layer_index("detect"));

  ModelOutput out;
  out.output_frame_offset = chain.frame_offset;
  const auto &m = tape.value(rec.masks);
  out.masks = Tensor3<double>(m.shape());
  out.source_magnitudes = Tensor3<double>(m.shape());
  for (int f = 0; f < m.f(); ++f) {
    for (int t = 0; t < m.t(); ++t) {
      const double mix = mixture(f, t + chain.frame_offset);
      for (int k = 0; k < m.c(); ++k) {
        const double v = m(f, t, k);
        out.masks(f, t, k) = v;
        out.source_magnitudes(f, t, k) = v * mix;
      }
    }
  }
  const auto &logits = tape.value(rec.prob_logits);
  out.vocal_probs.resize(logits.t());
  for (int t = 0; t < logits.t(); ++t)
    out.vocal_probs[t] = sigmoid(static_cast<double>(logits(0, t, 0)));
  return out;
}

template <typename T>
void backward(const ParameterSet<T> &params, ForwardRecord<T> &record,
              const Tensor3<double> &grad_masks,
              const std::vector<double> &grad_probs, ParamGrads &grads) {
  Require(record.tape.recorded() && record.masks >= 0, ErrorCode::kState,
          "backward called before a forward pass was recorded");
  std::vector<typename Tape<T>::Seed> seeds;
  if (!grad_masks.empty()) {
    const auto &m = record.tape.value(record.masks);
    Require(grad_masks.shape() == m.shape(), ErrorCode::kShape,
            "backward: mask gradient " + to_string(grad_masks.shape()) +
                " does not match masks " + to_string(m.shape()));
    Tensor3<T> g(m.shape());
    for (std::size_t i = 0; i < g.size(); ++i)
      g.data()[i] = static_cast<T>(grad_masks.data()[i]);
    seeds.push_back({record.masks, std::move(g)});
  }
  if (!grad_probs.empty()) {
    const auto &logits = record.tape.value(record.prob_logits);
    Require(static_cast<int>(grad_probs.size()) == logits.t(), ErrorCode::kShape,
            "backward: probability gradient has wrong length");
    Tensor3<T> g(logits.shape());
    for (int t = 0; t < logits.t(); ++t) {
      const double p = sigmoid(static_cast<double>(logits(0, t, 0)));
      g(0, t, 0) = static_cast<T>(grad_probs[t] * p * (1.0 - p));
    }
    seeds.push_back({record.prob_logits, std::move(g)});
  }
  if (grads.empty()) grads = zero_grads(params.layers);
  record.tape.backward(seeds, grads);
}

template <typename T>
TrackPrediction predict_track(const ParameterSet<T> &params,
                              const SpecMatrix &normalized_mixture) {
  const NetworkConfig &c = params.config;
  const ShapeChain chain = shape_chain(c);
  Require(normalized_mixture.rows() == c.fft_bins, ErrorCode::kShape,
          "predict_track: expected " + std::to_string(c.fft_bins) + " bins, got " +
              std::to_string(normalized_mixture.rows()));
  const int frames = static_cast<int>(normalized_mixture.cols());
  Require(frames > chain.frame_offset, ErrorCode::kInvalidArgument,
          "clip too short: " + std::to_string(frames) + " frames, need at least " +
              std::to_string(chain.frame_offset + 1));

  const int out = chain.output_frames;
  const int windows = (frames + out - 1) / out;
  const auto period = 2 * (frames - 1);
  auto source_frame = [&](int padded) {
    int i = padded - chain.frame_offset;
    if (frames == 1) return 0;
    i %= period;
    if (i < 0) i += period;
    return i < frames ? i : period - i;
  };

  TrackPrediction pred;
  pred.masks.assign(c.num_sources, SpecMatrix::Zero(c.fft_bins, frames));
  pred.vocal_probs.assign(frames, 0.0);
  FrameMatrix window(c.fft_bins, c.input_frames);
  ForwardRecord<T> record(params);
  for (int w = 0; w < windows; ++w) {
    const int start = w * out;
    for (int t = 0; t < c.input_frames; ++t) {
      const int src = source_frame(start + t);
      window.col(t) = normalized_mixture.col(src).template cast<float>();
    }
    const ModelOutput o = forward(params, window, &record);
    for (int j = 0; j < out && start + j < frames; ++j) {
      for (int k = 0; k < c.num_sources; ++k)
        for (int f = 0; f < c.fft_bins; ++f)
          pred.masks[k](f, start + j) = o.masks(f, j, k);
      pred.vocal_probs[start + j] = o.vocal_probs[j];
    }
  }
  return pred;
}

template <typename T>
std::vector<double> detect(const ParameterSet<T> &params, const AudioClip &clip) {
  Require(clip.sample_rate == kModelSampleRate, ErrorCode::kInvalidArgument,
          "detect: clip must be resampled to " + std::to_string(kModelSampleRate) +
              " Hz");
  const Spectrogram spec = stft(clip);
  return predict_track(params, normalize(spec.magnitudes)).vocal_probs;
}

std::vector<AudioClip> render_sources(const Spectrogram &mixture,
                                      const std::vector<SpecMatrix> &masks,
                                      int griffin_lim_iterations,
                                      int sample_rate) {
  std::vector<AudioClip> out;
  for (const auto &mask : masks) {
    Require(mask.rows() == mixture.magnitudes.rows() &&
                mask.cols() == mixture.magnitudes.cols(),
            ErrorCode::kShape, "render_sources: mask does not match the mixture");
    const SpecMatrix mag = mask * mixture.magnitudes;
    Spectrogram s = griffin_lim(mag, mixture.phases, mixture.config,
                                griffin_lim_iterations);
    s.signal_length = mixture.signal_length;
    out.push_back(istft(s, sample_rate));
  }
  return out;
}

template <typename T>
std::vector<AudioClip> separate(const ParameterSet<T> &params,
                                const AudioClip &clip,
                                int griffin_lim_iterations) {
  Require(clip.sample_rate == kModelSampleRate, ErrorCode::kInvalidArgument,
          "separate: clip must be resampled to " +
              std::to_string(kModelSampleRate) + " Hz");
  const Spectrogram spec = stft(clip);
  const auto pred = predict_track(params, normalize(spec.magnitudes));
  return render_sources(spec, pred.masks, griffin_lim_iterations, clip.sample_rate);
}

#define SVSD_MODEL_INSTANTIATE(T)                                             \
  template struct ParameterSet<T>;                                            \
  template ParameterSet<T> build<T>(const NetworkConfig &, std::uint64_t);   \
  template ModelOutput forward(const ParameterSet<T> &, const FrameMatrix &,  \
                               ForwardRecord<T> *);                           \
  template void backward(const ParameterSet<T> &, ForwardRecord<T> &,        \
                         const Tensor3<double> &, const std::vector<double> &, \
                         ParamGrads &);                                       \
  template TrackPrediction predict_track(const ParameterSet<T> &,             \
                                         const SpecMatrix &);                 \
  template std::vector<double> detect(const ParameterSet<T> &,                \
                                      const AudioClip &);                     \
  template std::vector<AudioClip> separate(const ParameterSet<T> &,           \
                                           const AudioClip &, int);

SVSD_MODEL_INSTANTIATE(float)
SVSD_MODEL_INSTANTIATE(double)

template ParameterSet<double> cast_parameters<double, float>(const ParameterSet<float> &);
template ParameterSet<float> cast_parameters<float, double>(const ParameterSet<double> &);

}  // namespace svsd
