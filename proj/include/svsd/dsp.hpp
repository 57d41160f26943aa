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

#include <cstddef>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

namespace svsd {

inline constexpr int kModelSampleRate = 22050;
inline constexpr int kDefaultFftSize = 512;
inline constexpr int kDefaultHop = 256;
inline constexpr int kDefaultGriffinLimIterations = 10;

/// Mono waveform. Samples are nominally in [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = kModelSampleRate;

  std::size_t size() const { return samples.size(); }
  double duration_seconds() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

/// F x T real matrix (frequency bins by frames).
using SpecMatrix = Eigen::ArrayXXd;

struct StftConfig {
  int fft_size = kDefaultFftSize;
  int hop = kDefaultHop;

  int bins() const { return fft_size / 2 + 1; }
  /// Frame count for a clip of `length` samples (ceil(len / hop) + 1).
  int frames_for(std::size_t length) const;
};

/// Complex STFT split into magnitude and phase planes.
/// `signal_length` is the length of the analysed clip; istft trims to it.
struct Spectrogram {
  SpecMatrix magnitudes;
  SpecMatrix phases;
  StftConfig config;
  bool normalized = false;
  std::size_t signal_length = 0;

  int bins() const { return static_cast<int>(magnitudes.rows()); }
  int frames() const { return static_cast<int>(magnitudes.cols()); }
};

// ---- audio I/O -------------------------------------------------------------

/// Reads a 16-bit PCM RIFF/WAVE file; stereo is averaged to mono.
AudioClip load_audio(const std::filesystem::path &path);

/// Writes a mono 16-bit PCM WAV. Samples outside [-1, 1) are clipped.
void save_audio(const std::filesystem::path &path, const AudioClip &clip);

/// Band-limited resampling with a Kaiser-windowed sinc kernel.
/// `taps_per_side` counts zero crossings of the kernel at the lower rate.
AudioClip resample(const AudioClip &clip, int target_rate,
                   int taps_per_side = 64);

// ---- STFT ------------------------------------------------------------------

/// Periodic Hann window of length n.
std::vector<double> hann_window(int n);

/// Frames are centred at t * hop after reflection padding of fft_size / 2.
Spectrogram stft(const AudioClip &clip, const StftConfig &config = {});

/// Weighted overlap-add with a Hann synthesis window, normalised by the
/// summed squared window. Output has spec.signal_length samples when set,
/// otherwise (T - 1) * hop.
AudioClip istft(const Spectrogram &spec, int sample_rate = kModelSampleRate);

/// Elementwise log(1 + x). Throws on negative input.
SpecMatrix normalize(const SpecMatrix &mag);
/// Elementwise exp(y) - 1.
SpecMatrix denormalize(const SpecMatrix &normalized);

/// Classic alternating-projection phase refinement. Magnitudes stay fixed;
/// each iteration replaces the phases by those of STFT(ISTFT(current)).
/// The projection runs on the padded frame domain so that it is an exact
/// orthogonal projection onto consistent spectrograms.
Spectrogram griffin_lim(const SpecMatrix &mag, const SpecMatrix &init_phase,
                        const StftConfig &config = {},
                        int iterations = kDefaultGriffinLimIterations,
                        std::vector<double> *distances = nullptr);

/// || mag - |STFT(ISTFT(mag * e^{i phase}))| || over the two-sided spectrum.
double consistency_distance(const SpecMatrix &mag, const SpecMatrix &phase,
                            const StftConfig &config = {});

/// Frame index -> time of the frame centre in seconds.
inline double frame_time(int frame, const StftConfig &config, int sample_rate) {
  return static_cast<double>(frame) * config.hop / sample_rate;
}

}  // namespace svsd
