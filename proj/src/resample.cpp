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

#include <algorithm>
#include <cmath>
#include <numbers>

#include "svsd/dsp.hpp"
#include "svsd/error.hpp"

namespace svsd {
namespace {

constexpr double kKaiserBeta = 9.0;

double Sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

double Kaiser(double x) {  // x in [-1, 1]
  if (std::abs(x) >= 1.0) return 0.0;
  return std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(1.0 - x * x)) /
         std::cyl_bessel_i(0.0, kKaiserBeta);
}

// Kernel sinc(u) * kaiser(u / taps) tabulated over u in [0, taps] with
// linear interpolation between entries.
class KernelTable {
 public:
  static constexpr int kPerCrossing = 4096;

  explicit KernelTable(int taps) : taps_(taps) {
    table_.resize(static_cast<std::size_t>(taps) * kPerCrossing + 2);
    for (std::size_t i = 0; i < table_.size(); ++i) {
      double u = static_cast<double>(i) / kPerCrossing;
      table_[i] = Sinc(u) * Kaiser(u / taps);
    }
  }

  double operator()(double u) const {
    u = std::abs(u);
    if (u >= taps_) return 0.0;
    const double pos = u * kPerCrossing;
    const auto i = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    return table_[i] + frac * (table_[i + 1] - table_[i]);
  }

 private:
  int taps_;
  std::vector<double> table_;
};

}  // namespace

AudioClip resample(const AudioClip &clip, int target_rate, int taps_per_side) {
  Require(target_rate > 0, ErrorCode::kInvalidArgument,
          "resample: target rate must be positive");
  Require(clip.sample_rate > 0, ErrorCode::kInvalidArgument,
          "resample: source rate must be positive");
  Require(taps_per_side > 0, ErrorCode::kInvalidArgument,
          "resample: taps_per_side must be positive");
  if (target_rate == clip.sample_rate) return clip;

  const double ratio = static_cast<double>(target_rate) / clip.sample_rate;
  // Cutoff relative to the input Nyquist; below 1 when decimating.
  const double scale = std::min(1.0, ratio);
  const double half_width = taps_per_side / scale;  // in input samples
  const auto in_len = static_cast<std::ptrdiff_t>(clip.samples.size());
  const auto out_len = static_cast<std::size_t>(
      std::llround(static_cast<double>(in_len) * ratio));

  const KernelTable kernel(taps_per_side);
  AudioClip out;
  out.sample_rate = target_rate;
  out.samples.assign(out_len, 0.0);
  for (std::size_t n = 0; n < out_len; ++n) {
    const double center = static_cast<double>(n) / ratio;
    auto lo = static_cast<std::ptrdiff_t>(std::ceil(center - half_width));
    auto hi = static_cast<std::ptrdiff_t>(std::floor(center + half_width));
    lo = std::max<std::ptrdiff_t>(lo, 0);
    hi = std::min<std::ptrdiff_t>(hi, in_len - 1);
    double acc = 0.0;
    for (std::ptrdiff_t k = lo; k <= hi; ++k) {
      const double d = static_cast<double>(k) - center;
      acc += clip.samples[k] * kernel(scale * d);
    }
    out.samples[n] = scale * acc;
  }
  return out;
}

}  // namespace svsd
