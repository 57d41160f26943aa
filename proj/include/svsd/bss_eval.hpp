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
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "svsd/dsp.hpp"

namespace svsd {

inline constexpr int kDefaultFilterLength = 512;

struct ExcerptSpan {
  double start_s = 0.0;
  double end_s = 0.0;
};

/// Fixed-length windows starting at 0, hop, 2 hop, ...; a trailing window
/// shorter than `window_s` is dropped.
std::vector<ExcerptSpan> segment(double length_s, double window_s = 30.0,
                                 double hop_s = 15.0);

struct SourceMetrics {
  double sdr = 0.0;
  double sir = 0.0;
  double sar = 0.0;
};

/// Orthogonal decomposition of one estimate, each of length n + L - 1.
struct Decomposition {
  std::vector<double> target;
  std::vector<double> interference;
  std::vector<double> artifacts;
  bool ridge_used = false;
};

/// Projects estimate j onto time shifts 0..L-1 of its reference (target)
/// and of all references (target + interference).
Decomposition decompose(const std::vector<std::vector<double>> &references,
                        const std::vector<double> &estimate, std::size_t j,
                        int filter_length = kDefaultFilterLength);

SourceMetrics metrics_from(const Decomposition &d);

/// Metrics for every source of one segment without exclusion logic.
std::vector<SourceMetrics> bss_metrics(const std::vector<std::vector<double>> &references,
                                       const std::vector<std::vector<double>> &estimates,
                                       int filter_length = kDefaultFilterLength,
                                       int *ridge_events = nullptr);

struct BssConfig {
  int filter_length = kDefaultFilterLength;
  double window_s = 30.0;
  double hop_s = 15.0;
  /// A reference counts as silent when max |x| <= silence_epsilon.
  double silence_epsilon = 0.0;
};

struct ExcerptResult {
  ExcerptSpan span;
  bool excluded = false;
  std::vector<SourceMetrics> sources;  // empty when excluded
};

struct BssResult {
  std::vector<ExcerptResult> excerpts;
  int excluded_count = 0;
  int included_count = 0;
  int ridge_events = 0;
  std::size_t sources = 0;

  /// Means over included excerpts; NaN when there are none.
  SourceMetrics mean(std::size_t source) const;
};

BssResult bss_eval(const std::vector<AudioClip> &references,
                   const std::vector<AudioClip> &estimates, const BssConfig &config = {});

/// Mean RMS of the vocal estimate over the excluded excerpts, or nothing when
/// no excerpt was excluded.
std::optional<double> nonvocal_rms(const AudioClip &estimate_vocals,
                                   const BssResult &result);

/// Rows `track,source,start_s,sdr,sir,sar,excluded`.
void write_excerpt_csv_header(std::ostream &out);
void write_excerpt_csv(std::ostream &out, const std::string &track,
                       const std::vector<std::string> &source_names,
                       const BssResult &result);

// ---- evaluation flaw -------------------------------------------------------

struct FlawStep {
  double amplitude = 0.0;
  double mean_sdr_vocals = 0.0;
  double mean_sdr_accompaniment = 0.0;
  double delta_sdr_vocals = 0.0;
  double nonvocal_rms = 0.0;
};

struct FlawReport {
  std::string track;
  double region_start_s = 0.0;
  double region_end_s = 0.0;
  int excluded_count = 0;
  int included_count = 0;
  FlawStep baseline;
  std::vector<FlawStep> steps;
};

/// Samples covered by excluded excerpts and by no included one, as the
/// longest contiguous run [begin, end). Empty when there is none.
std::pair<std::size_t, std::size_t> excluded_only_region(const BssResult &result,
                                                         int sample_rate,
                                                         std::size_t length);

/// Adds seeded white noise of each amplitude to the vocal estimate inside
/// the excluded-only region and re-evaluates.
FlawReport flaw_demo(const std::string &track, const std::vector<AudioClip> &references,
                     const std::vector<AudioClip> &estimates,
                     const std::vector<double> &amplitudes, std::uint64_t seed,
                     const BssConfig &config = {});

}  // namespace svsd
