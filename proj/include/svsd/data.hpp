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
#include <random>
#include <string>
#include <vector>

#include "svsd/dsp.hpp"
#include "svsd/model.hpp"

namespace svsd {

using Rng = std::mt19937_64;
using FrameLabels = std::vector<std::uint8_t>;

inline constexpr int kActivityWindow = 221;  // 10 ms at 22050 Hz
inline constexpr double kActivityThreshold = 5e-4;

struct MultiTrackSong {
  std::string id;
  AudioClip mixture;
  AudioClip vocals;
  AudioClip accompaniment;
};

struct LabeledMixtureSong {
  std::string id;
  AudioClip mixture;
  FrameLabels frame_labels;  // one per spectrogram frame
};

/// Songs of one collection split into training and test partitions.
struct Corpus {
  std::vector<MultiTrackSong> multitrack_train;
  std::vector<MultiTrackSong> multitrack_test;
  std::vector<LabeledMixtureSong> labeled_train;
  std::vector<LabeledMixtureSong> labeled_test;

  bool empty() const {
    return multitrack_train.empty() && multitrack_test.empty() &&
           labeled_train.empty() && labeled_test.empty();
  }
};

/// Non-overlapping 10 ms windows; active iff mean |x| > 5e-4. A trailing
/// partial window is averaged over the samples it has.
FrameLabels window_activity(const AudioClip &clip);

/// Index of the window whose centre is nearest to a frame centre.
int nearest_window(int frame, int window_count, const StftConfig &config = {});

/// Window labels mapped onto the clip's spectrogram frames.
FrameLabels label_activity(const AudioClip &clip, const StftConfig &config = {});

/// Frame-window layout of training excerpts.
struct WindowGeometry {
  int input_frames = 222;
  int output_frames = 130;
  int offset = 46;
  int bins = 257;

  static WindowGeometry from(const NetworkConfig &config);
};

/// A multitrack song as normalised magnitude planes (bins x frames).
struct SvsTrack {
  std::string id;
  FrameMatrix mixture;
  FrameMatrix vocals;
  FrameMatrix accompaniment;
  FrameLabels vocal_windows;  // window_activity of the vocal stem

  int frames() const { return static_cast<int>(mixture.cols()); }
};

struct SvdTrack {
  std::string id;
  FrameMatrix mixture;
  FrameLabels labels;

  int frames() const { return static_cast<int>(mixture.cols()); }
};

/// Resamples to the model rate if needed and computes the cached planes.
SvsTrack prepare_svs_track(const MultiTrackSong &song);
SvdTrack prepare_svd_track(const LabeledMixtureSong &song);

struct SvsSample {
  FrameMatrix mixture;      // bins x input_frames
  Tensor3<double> targets;  // bins x output_frames x 2 (vocals, accompaniment)
  std::string source_id;
  int start_frame = 0;
  bool replaced = false;
};

struct SvdSample {
  FrameMatrix mixture;
  FrameLabels labels;  // output_frames entries
  std::string source_id;
  int start_frame = 0;
};

class SvsDataset {
 public:
  /// Tracks shorter than one input window are rejected with a warning on
  /// stderr; their ids are kept in rejected().
  SvsDataset(std::vector<SvsTrack> tracks, WindowGeometry geometry);

  std::size_t size() const { return tracks_.size(); }
  const std::vector<SvsTrack> &tracks() const { return tracks_; }
  const std::vector<std::string> &rejected() const { return rejected_; }
  const WindowGeometry &geometry() const { return geometry_; }

  /// Uniform track, then uniform start frame.
  SvsSample sample(Rng &rng) const;
  SvsSample excerpt(std::size_t track, int start_frame) const;
  /// True when every 10 ms vocal window under the target frames is inactive.
  bool vocals_silent(std::size_t track, int start_frame) const;

 private:
  std::vector<SvsTrack> tracks_;
  std::vector<std::string> rejected_;
  WindowGeometry geometry_;
};

class SvdDataset {
 public:
  SvdDataset(std::vector<SvdTrack> tracks, WindowGeometry geometry);

  std::size_t size() const { return tracks_.size(); }
  const std::vector<SvdTrack> &tracks() const { return tracks_; }
  const std::vector<std::string> &rejected() const { return rejected_; }
  const WindowGeometry &geometry() const { return geometry_; }

  SvdSample sample(Rng &rng) const;
  SvdSample excerpt(std::size_t track, int start_frame) const;

  /// Contiguous unlabelled runs of at least one input window.
  struct Run {
    std::size_t track;
    int first;
    int length;
  };
  const std::vector<Run> &nonvocal_runs() const { return runs_; }
  bool has_nonvocal() const { return !runs_.empty(); }
  /// Start frame drawn uniformly over all valid window positions inside
  /// non-vocal runs (runs weighted by their number of positions).
  SvdSample sample_nonvocal(Rng &rng) const;

 private:
  std::vector<SvdTrack> tracks_;
  std::vector<std::string> rejected_;
  std::vector<Run> runs_;
  std::vector<long> run_positions_;  // cumulative position counts
  WindowGeometry geometry_;
};

enum class Strategy { kSvsOnly, kSvdOnly, kMtl, kReplacement };

Strategy strategy_from_string(const std::string &name);
std::string to_string(Strategy s);

struct SamplerStats {
  long eligible = 0;   // silent-vocal excerpts seen
  long replaced = 0;
  long no_section = 0;  // eligible but no non-vocal section available
};

/// With probability n / (n + m) swaps an excerpt whose vocal target is
/// silent for a non-vocal detection excerpt: the accompaniment target
/// becomes the mixture itself and the vocal target zero. Returns whether
/// the swap happened.
bool replacement_sampler(Rng &rng, SvsSample &sample, bool vocals_silent,
                         const SvdDataset *svd, double n, double m,
                         SamplerStats &stats);

struct ExcerptBatch {
  std::vector<SvsSample> svs;
  std::vector<SvdSample> svd;
};

/// svs_only: B separation samples; svd_only: B detection samples;
/// mtl: B of each; replacement: B separation samples passed through the
/// replacement sampler with n = |svs|, m = |svd|.
ExcerptBatch make_batch(Rng &rng, const SvsDataset *svs, const SvdDataset *svd,
                        int batch_size, Strategy strategy,
                        SamplerStats *stats = nullptr);

}  // namespace svsd
