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

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "svsd/diffcore.hpp"
#include "svsd/dsp.hpp"

namespace svsd {

/// Normalised magnitudes (F x T) as fed to the network.
using FrameMatrix = Eigen::ArrayXXf;

struct NetworkConfig {
  int base_channels = 16;
  int depth = 4;
  int input_frames = 222;
  int fft_bins = 257;
  int padded_bins = 350;
  int num_sources = 2;
  double leaky_slope = 0.01;

  friend bool operator==(const NetworkConfig &, const NetworkConfig &) = default;
};

/// Every intermediate shape of the U-Net for a given configuration.
struct ShapeChain {
  Shape3 input;
  std::vector<Shape3> down;   // level 0 (initial conv) .. depth (bottleneck)
  Shape3 collapsed;           // after the frequency-collapsing conv
  Shape3 expanded;            // after its transposed counterpart
  std::vector<Shape3> up;     // output of each up block
  Shape3 features;            // final base map concatenated with the input crop
  int output_bins = 0;        // network bins (before dropping the top rows)
  int output_frames = 0;
  int frame_offset = 0;       // context frames trimmed at the start
  int bin_offset = 0;         // row offset of the input crop
};

/// Validates the configuration; the error names the offending layer.
ShapeChain shape_chain(const NetworkConfig &config);

/// Smallest padded bin count whose shape chain yields >= fft_bins outputs
/// without odd-sized pooling.
int derive_padded_bins(const NetworkConfig &config);

template <typename T>
struct ParameterSet {
  NetworkConfig config;
  std::uint64_t seed = 0;
  std::vector<LayerParams<T>> layers;
  double log_sigma = 0.0;  // learnable log-std of the likelihood loss

  int layer_index(std::string_view name) const;
};

/// Builds all layers with He-normal kernels (variance 2 / fan_in) and zero
/// biases.
template <typename T>
ParameterSet<T> build(const NetworkConfig &config, std::uint64_t seed);

template <typename To, typename From>
ParameterSet<To> cast_parameters(const ParameterSet<From> &params);

struct ModelOutput {
  Tensor3<double> masks;              // fft_bins x output_frames x K, in [0, 1]
  Tensor3<double> source_magnitudes;  // masks * cropped (normalised) mixture
  std::vector<double> vocal_probs;    // one per output frame
  int output_frame_offset = 0;
};

/// A recorded forward pass that can be differentiated.
template <typename T>
struct ForwardRecord {
  explicit ForwardRecord(const ParameterSet<T> &params) : tape(params.layers) {}
  Tape<T> tape;
  typename Tape<T>::Node input = -1;
  typename Tape<T>::Node masks = -1;
  typename Tape<T>::Node prob_logits = -1;
};

/// Runs the network on one excerpt of normalised magnitudes
/// (fft_bins x input_frames). The input is zero-padded above the top bin.
template <typename T>
ModelOutput forward(const ParameterSet<T> &params, const FrameMatrix &mixture,
                    ForwardRecord<T> *record = nullptr);

/// Back-propagates dLoss/dmasks (fft_bins x frames x K, may be empty) and
/// dLoss/dprobs (may be empty) through a recorded pass into `grads`.
template <typename T>
void backward(const ParameterSet<T> &params, ForwardRecord<T> &record,
              const Tensor3<double> &grad_masks,
              const std::vector<double> &grad_probs, ParamGrads &grads);

/// Masks and vocal probabilities for a full track, tiling windows with a hop
/// of output_frames and reflection padding in time.
struct TrackPrediction {
  std::vector<SpecMatrix> masks;  // K planes of fft_bins x T
  std::vector<double> vocal_probs;
};

template <typename T>
TrackPrediction predict_track(const ParameterSet<T> &params,
                              const SpecMatrix &normalized_mixture);

/// Per-frame vocal probabilities for a 22050 Hz mono clip.
template <typename T>
std::vector<double> detect(const ParameterSet<T> &params, const AudioClip &clip);

/// Applies masks to the mixture magnitudes and renders every source with the
/// mixture phase followed by Griffin-Lim refinement.
std::vector<AudioClip> render_sources(const Spectrogram &mixture,
                                      const std::vector<SpecMatrix> &masks,
                                      int griffin_lim_iterations,
                                      int sample_rate);

/// K source estimates (vocals first) of the same length as the input.
template <typename T>
std::vector<AudioClip> separate(
    const ParameterSet<T> &params, const AudioClip &clip,
    int griffin_lim_iterations = kDefaultGriffinLimIterations);

// ---- checkpoints ---------------------------------------------------------------

struct Checkpoint {
  ParameterSet<float> params;
  AdamState adam;
  long iteration = 0;
};

/// Layout: "SVSDCKPT", u64 little-endian manifest length, UTF-8 JSON
/// manifest, then raw little-endian float32 arrays at the listed offsets.
void save_checkpoint(const std::filesystem::path &path, const Checkpoint &ckpt);
Checkpoint load_checkpoint(const std::filesystem::path &path);

/// Adam slots in canonical order: every layer's kernel and bias, then
/// log_sigma.
std::vector<ParamSlot> parameter_slots(ParameterSet<float> &params,
                                       const ParamGrads &grads,
                                       const std::vector<double> &log_sigma_grad);

}  // namespace svsd
