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

#include <cmath>
#include <complex>
#include <numbers>

#include <unsupported/Eigen/FFT>

#include "svsd/dsp.hpp"
#include "svsd/error.hpp"

namespace svsd {
namespace {

using Complex = std::complex<double>;

class RealFft {
 public:
  explicit RealFft(int n) : n_(n), time_(n), freq_(n / 2 + 1) {
    fft_.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  }
  std::vector<double> &time() { return time_; }
  std::vector<Complex> &freq() { return freq_; }
  void forward() { fft_.fwd(freq_, time_); }
  void inverse() { fft_.inv(time_, freq_, n_); }

 private:
  int n_;
  Eigen::FFT<double> fft_;
  std::vector<double> time_;
  std::vector<Complex> freq_;
};

// Mirror index into [0, n) with reflection about the end samples
// (no repeat of the edge sample), extended periodically.
std::ptrdiff_t Reflect(std::ptrdiff_t i, std::ptrdiff_t n) {
  if (n == 1) return 0;
  const std::ptrdiff_t period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

void CheckConfig(const StftConfig &c) {
  Require(c.fft_size >= 2 && (c.fft_size & (c.fft_size - 1)) == 0,
          ErrorCode::kInvalidArgument,
          "fft_size must be a power of two, got " + std::to_string(c.fft_size));
  Require(c.hop > 0 && c.hop <= c.fft_size, ErrorCode::kInvalidArgument,
          "hop must be in (0, fft_size], got " + std::to_string(c.hop));
}

// Analyses frames t * hop of an already padded signal.
void AnalyzeFrames(const std::vector<double> &padded, const StftConfig &c,
                   int frames, Eigen::ArrayXXcd &out) {
  const auto window = hann_window(c.fft_size);
  RealFft fft(c.fft_size);
  out.resize(c.bins(), frames);
  for (int t = 0; t < frames; ++t) {
    const std::size_t start = static_cast<std::size_t>(t) * c.hop;
    for (int n = 0; n < c.fft_size; ++n)
      fft.time()[n] = padded[start + n] * window[n];
    fft.forward();
    for (int k = 0; k < c.bins(); ++k) out(k, t) = fft.freq()[k];
  }
}

// Least-squares inverse of AnalyzeFrames: returns the padded-domain signal of
// length (T - 1) * hop + fft_size.
std::vector<double> OverlapAdd(const Eigen::ArrayXXcd &spec,
                               const StftConfig &c) {
  const int frames = static_cast<int>(spec.cols());
  const auto window = hann_window(c.fft_size);
  const std::size_t length =
      static_cast<std::size_t>(frames - 1) * c.hop + c.fft_size;
  std::vector<double> out(length, 0.0), norm(length, 0.0);
  RealFft fft(c.fft_size);
  for (int t = 0; t < frames; ++t) {
    for (int k = 0; k < c.bins(); ++k) fft.freq()[k] = spec(k, t);
    // A real signal has real DC and Nyquist coefficients.
    fft.freq()[0] = fft.freq()[0].real();
    fft.freq()[c.bins() - 1] = fft.freq()[c.bins() - 1].real();
    fft.inverse();
    const std::size_t start = static_cast<std::size_t>(t) * c.hop;
    for (int n = 0; n < c.fft_size; ++n) {
      out[start + n] += window[n] * fft.time()[n];
      norm[start + n] += window[n] * window[n];
    }
  }
  for (std::size_t i = 0; i < length; ++i)
    out[i] = norm[i] > 1e-12 ? out[i] / norm[i] : 0.0;
  return out;
}

Eigen::ArrayXXcd Polar(const SpecMatrix &mag, const SpecMatrix &phase) {
  Eigen::ArrayXXcd z(mag.rows(), mag.cols());
  for (Eigen::Index t = 0; t < mag.cols(); ++t)
    for (Eigen::Index k = 0; k < mag.rows(); ++k)
      z(k, t) = std::polar(mag(k, t), phase(k, t));
  return z;
}

void CheckPlanes(const SpecMatrix &mag, const SpecMatrix &phase,
                 const StftConfig &c) {
  CheckConfig(c);
  Require(mag.rows() == c.bins(), ErrorCode::kShape,
          "spectrogram has " + std::to_string(mag.rows()) +
              " bins but fft_size " + std::to_string(c.fft_size) +
              " implies " + std::to_string(c.bins()));
  Require(mag.cols() >= 1, ErrorCode::kShape, "spectrogram has no frames");
  Require(phase.rows() == mag.rows() && phase.cols() == mag.cols(),
          ErrorCode::kShape, "magnitude and phase planes differ in shape");
}

}  // namespace

int StftConfig::frames_for(std::size_t length) const {
  return static_cast<int>((length + hop - 1) / hop) + 1;
}

std::vector<double> hann_window(int n) {
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  return w;
}

Spectrogram stft(const AudioClip &clip, const StftConfig &config) {
  CheckConfig(config);
  Require(!clip.samples.empty(), ErrorCode::kInvalidArgument,
          "stft: clip has no samples");
  const auto len = static_cast<std::ptrdiff_t>(clip.samples.size());
  const int frames = config.frames_for(clip.samples.size());
  const std::size_t padded_len =
      static_cast<std::size_t>(frames - 1) * config.hop + config.fft_size;
  const std::ptrdiff_t half = config.fft_size / 2;
  std::vector<double> padded(padded_len);
  for (std::size_t i = 0; i < padded_len; ++i)
    padded[i] =
        clip.samples[Reflect(static_cast<std::ptrdiff_t>(i) - half, len)];

  Eigen::ArrayXXcd z;
  AnalyzeFrames(padded, config, frames, z);
  Spectrogram spec;
  spec.magnitudes = z.abs();
  spec.phases = z.arg();
  spec.config = config;
  spec.signal_length = clip.samples.size();
  return spec;
}

AudioClip istft(const Spectrogram &spec, int sample_rate) {
  Require(!spec.normalized, ErrorCode::kInvalidArgument,
          "istft: spectrogram is log-normalised; denormalize first");
  CheckPlanes(spec.magnitudes, spec.phases, spec.config);
  const auto padded =
      OverlapAdd(Polar(spec.magnitudes, spec.phases), spec.config);
  const std::size_t half = spec.config.fft_size / 2;
  std::size_t length = spec.signal_length;
  if (length == 0)
    length = static_cast<std::size_t>(spec.frames() - 1) * spec.config.hop;
  Require(length + half <= padded.size(), ErrorCode::kShape,
          "istft: signal_length exceeds the frame span");
  AudioClip clip;
  clip.sample_rate = sample_rate;
  clip.samples.assign(padded.begin() + static_cast<std::ptrdiff_t>(half),
                      padded.begin() + static_cast<std::ptrdiff_t>(half + length));
  return clip;
}

SpecMatrix normalize(const SpecMatrix &mag) {
  Require((mag >= 0.0).all(), ErrorCode::kInvalidArgument,
          "normalize: negative magnitude");
  return mag.log1p();
}

SpecMatrix denormalize(const SpecMatrix &normalized) {
  return normalized.unaryExpr([](double y) { return std::expm1(y); });
}

namespace {

double TwoSidedDistance(const SpecMatrix &mag, const Eigen::ArrayXXcd &c) {
  const Eigen::Index bins = mag.rows();
  double acc = 0.0;
  for (Eigen::Index t = 0; t < mag.cols(); ++t) {
    for (Eigen::Index k = 0; k < bins; ++k) {
      double d = mag(k, t) - std::abs(c(k, t));
      double weight = (k == 0 || k == bins - 1) ? 1.0 : 2.0;
      acc += weight * d * d;
    }
  }
  return std::sqrt(acc);
}

Eigen::ArrayXXcd Reproject(const Eigen::ArrayXXcd &z, const StftConfig &c) {
  const auto signal = OverlapAdd(z, c);
  Eigen::ArrayXXcd out;
  AnalyzeFrames(signal, c, static_cast<int>(z.cols()), out);
  return out;
}

}  // namespace

double consistency_distance(const SpecMatrix &mag, const SpecMatrix &phase,
                            const StftConfig &config) {
  CheckPlanes(mag, phase, config);
  return TwoSidedDistance(mag, Reproject(Polar(mag, phase), config));
}

Spectrogram griffin_lim(const SpecMatrix &mag, const SpecMatrix &init_phase,
                        const StftConfig &config, int iterations,
                        std::vector<double> *distances) {
  CheckPlanes(mag, init_phase, config);
  Require(iterations >= 0, ErrorCode::kInvalidArgument,
          "griffin_lim: iterations must be >= 0");
  Spectrogram out;
  out.config = config;
  out.magnitudes = mag;
  out.phases = init_phase;
  if (distances) distances->clear();
  for (int it = 0; it < iterations; ++it) {
    const auto projected = Reproject(Polar(mag, out.phases), config);
    if (distances) distances->push_back(TwoSidedDistance(mag, projected));
    out.phases = projected.arg();
  }
  return out;
}

}  // namespace svsd
