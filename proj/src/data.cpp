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

#include "svsd/data.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "svsd/error.hpp"

namespace svsd {
namespace {

AudioClip AtModelRate(const AudioClip &clip) {
  if (clip.sample_rate == kModelSampleRate) return clip;
  return resample(clip, kModelSampleRate);
}

FrameMatrix NormalizedPlane(const AudioClip &clip) {
  return normalize(stft(clip).magnitudes).cast<float>();
}

int UniformInt(Rng &rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

template <typename Track>
std::vector<Track> KeepLongEnough(std::vector<Track> tracks, int input_frames,
                                  const char *kind,
                                  std::vector<std::string> &rejected) {
  std::vector<Track> kept;
  kept.reserve(tracks.size());
  for (auto &t : tracks) {
    if (t.frames() < input_frames) {
      std::cerr << "svsd: warning: " << kind << " song '" << t.id << "' has "
                << t.frames() << " frames, fewer than one " << input_frames
                << "-frame window; skipped\n";
      rejected.push_back(t.id);
      continue;
    }
    kept.push_back(std::move(t));
  }
  return kept;
}

}  // namespace

FrameLabels window_activity(const AudioClip &clip) {
  const std::size_t n = clip.samples.size();
  const std::size_t windows = (n + kActivityWindow - 1) / kActivityWindow;
  FrameLabels out(windows, 0);
  for (std::size_t w = 0; w < windows; ++w) {
    const std::size_t begin = w * kActivityWindow;
    const std::size_t end = std::min(n, begin + kActivityWindow);
    double sum = 0.0;
    for (std::size_t i = begin; i < end; ++i) sum += std::abs(clip.samples[i]);
    out[w] = sum / static_cast<double>(end - begin) > kActivityThreshold;
  }
  return out;
}

int nearest_window(int frame, int window_count, const StftConfig &config) {
  if (window_count <= 0) return -1;
  const double centre = static_cast<double>(frame) * config.hop;
  const double half = (kActivityWindow - 1) / 2.0;
  const long w = std::lround((centre - half) / kActivityWindow);
  return static_cast<int>(std::clamp<long>(w, 0, window_count - 1));
}

FrameLabels label_activity(const AudioClip &clip, const StftConfig &config) {
  const FrameLabels windows = window_activity(clip);
  const int frames = config.frames_for(clip.samples.size());
  FrameLabels labels(frames, 0);
  const int count = static_cast<int>(windows.size());
  for (int t = 0; t < frames; ++t) {
    const int w = nearest_window(t, count, config);
    labels[t] = w >= 0 ? windows[w] : 0;
  }
  return labels;
}

WindowGeometry WindowGeometry::from(const NetworkConfig &config) {
  const ShapeChain chain = shape_chain(config);
  WindowGeometry g;
  g.input_frames = config.input_frames;
  g.output_frames = chain.output_frames;
  g.offset = chain.frame_offset;
  g.bins = config.fft_bins;
  return g;
}

SvsTrack prepare_svs_track(const MultiTrackSong &song) {
  const AudioClip mix = AtModelRate(song.mixture);
  const AudioClip voc = AtModelRate(song.vocals);
  const AudioClip acc = AtModelRate(song.accompaniment);
  Require(mix.size() == voc.size() && mix.size() == acc.size(), ErrorCode::kFormat,
          "song '" + song.id + "': stems differ in length (" +
              std::to_string(mix.size()) + ", " + std::to_string(voc.size()) +
              ", " + std::to_string(acc.size()) + " samples)");
  SvsTrack t;
  t.id = song.id;
  t.mixture = NormalizedPlane(mix);
  t.vocals = NormalizedPlane(voc);
  t.accompaniment = NormalizedPlane(acc);
  t.vocal_windows = window_activity(voc);
  return t;
}

SvdTrack prepare_svd_track(const LabeledMixtureSong &song) {
  const AudioClip mix = AtModelRate(song.mixture);
  SvdTrack t;
  t.id = song.id;
  t.mixture = NormalizedPlane(mix);
  t.labels = song.frame_labels;
  Require(static_cast<int>(t.labels.size()) == t.frames(), ErrorCode::kFormat,
          "song '" + song.id + "': " + std::to_string(t.labels.size()) +
              " labels for " + std::to_string(t.frames()) + " frames");
  return t;
}

// ---- separation dataset ------------------------------------------------------

SvsDataset::SvsDataset(std::vector<SvsTrack> tracks, WindowGeometry geometry)
    : geometry_(geometry) {
  tracks_ = KeepLongEnough(std::move(tracks), geometry.input_frames, "multitrack",
                           rejected_);
}

SvsSample SvsDataset::sample(Rng &rng) const {
  Require(!tracks_.empty(), ErrorCode::kState, "separation dataset is empty");
  const auto track = static_cast<std::size_t>(
      UniformInt(rng, 0, static_cast<int>(tracks_.size()) - 1));
  const int start =
      UniformInt(rng, 0, tracks_[track].frames() - geometry_.input_frames);
  return excerpt(track, start);
}

SvsSample SvsDataset::excerpt(std::size_t track, int start_frame) const {
  const SvsTrack &t = tracks_.at(track);
  const auto &g = geometry_;
  Require(start_frame >= 0 && start_frame + g.input_frames <= t.frames(),
          ErrorCode::kInvalidArgument, "excerpt start out of range");
  SvsSample s;
  s.source_id = t.id;
  s.start_frame = start_frame;
  s.mixture = t.mixture.block(0, start_frame, g.bins, g.input_frames);
  s.targets = Tensor3<double>(g.bins, g.output_frames, 2);
  const int first = start_frame + g.offset;
  for (int f = 0; f < g.bins; ++f) {
    for (int k = 0; k < g.output_frames; ++k) {
      s.targets(f, k, 0) = t.vocals(f, first + k);
      s.targets(f, k, 1) = t.accompaniment(f, first + k);
    }
  }
  return s;
}

bool SvsDataset::vocals_silent(std::size_t track, int start_frame) const {
  const SvsTrack &t = tracks_.at(track);
  const int count = static_cast<int>(t.vocal_windows.size());
  if (count == 0) return true;
  const int first = start_frame + geometry_.offset;
  const int w0 = nearest_window(first, count);
  const int w1 = nearest_window(first + geometry_.output_frames - 1, count);
  for (int w = w0; w <= w1; ++w)
    if (t.vocal_windows[w]) return false;
  return true;
}

// ---- detection dataset -------------------------------------------------------

SvdDataset::SvdDataset(std::vector<SvdTrack> tracks, WindowGeometry geometry)
    : geometry_(geometry) {
  tracks_ = KeepLongEnough(std::move(tracks), geometry.input_frames, "labelled",
                           rejected_);
  long total = 0;
  for (std::size_t i = 0; i < tracks_.size(); ++i) {
    const auto &labels = tracks_[i].labels;
    const int n = static_cast<int>(labels.size());
    int t = 0;
    while (t < n) {
      if (labels[t]) {
        ++t;
        continue;
      }
      int end = t;
      while (end < n && !labels[end]) ++end;
      if (end - t >= geometry.input_frames) {
        runs_.push_back({i, t, end - t});
        total += end - t - geometry.input_frames + 1;
        run_positions_.push_back(total);
      }
      t = end;
    }
  }
}

SvdSample SvdDataset::sample(Rng &rng) const {
  Require(!tracks_.empty(), ErrorCode::kState, "detection dataset is empty");
  const auto track = static_cast<std::size_t>(
      UniformInt(rng, 0, static_cast<int>(tracks_.size()) - 1));
  const int start =
      UniformInt(rng, 0, tracks_[track].frames() - geometry_.input_frames);
  return excerpt(track, start);
}

SvdSample SvdDataset::excerpt(std::size_t track, int start_frame) const {
  const SvdTrack &t = tracks_.at(track);
  const auto &g = geometry_;
  Require(start_frame >= 0 && start_frame + g.input_frames <= t.frames(),
          ErrorCode::kInvalidArgument, "excerpt start out of range");
  SvdSample s;
  s.source_id = t.id;
  s.start_frame = start_frame;
  s.mixture = t.mixture.block(0, start_frame, g.bins, g.input_frames);
  const auto first = t.labels.begin() + start_frame + g.offset;
  s.labels.assign(first, first + g.output_frames);
  return s;
}

SvdSample SvdDataset::sample_nonvocal(Rng &rng) const {
  Require(has_nonvocal(), ErrorCode::kState,
          "detection dataset has no non-vocal section of one window");
  const long pick =
      std::uniform_int_distribution<long>(0, run_positions_.back() - 1)(rng);
  const auto it = std::upper_bound(run_positions_.begin(), run_positions_.end(), pick);
  const std::size_t r = static_cast<std::size_t>(it - run_positions_.begin());
  const long before = r == 0 ? 0 : run_positions_[r - 1];
  const Run &run = runs_[r];
  return excerpt(run.track, run.first + static_cast<int>(pick - before));
}

// ---- batching ----------------------------------------------------------------

Strategy strategy_from_string(const std::string &name) {
  if (name == "svs_only" || name == "svs") return Strategy::kSvsOnly;
  if (name == "svd_only" || name == "svd") return Strategy::kSvdOnly;
  if (name == "mtl") return Strategy::kMtl;
  if (name == "replacement") return Strategy::kReplacement;
  Fail(ErrorCode::kInvalidArgument,
       "unknown mode '" + name + "' (expected svs, svd, mtl or replacement)");
}

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::kSvsOnly: return "svs_only";
    case Strategy::kSvdOnly: return "svd_only";
    case Strategy::kMtl: return "mtl";
    case Strategy::kReplacement: return "replacement";
  }
  return "unknown";
}

bool replacement_sampler(Rng &rng, SvsSample &sample, bool vocals_silent,
                         const SvdDataset *svd, double n, double m,
                         SamplerStats &stats) {
  if (!vocals_silent) return false;
  ++stats.eligible;
  const double p = n / (n + m);
  if (!std::bernoulli_distribution(p)(rng)) return false;
  if (!svd || !svd->has_nonvocal()) {
    ++stats.no_section;
    return false;
  }
  SvdSample other = svd->sample_nonvocal(rng);
  const int offset = svd->geometry().offset;
  const int bins = static_cast<int>(sample.targets.f());
  const int frames = static_cast<int>(sample.targets.t());
  sample.mixture = std::move(other.mixture);
  for (int f = 0; f < bins; ++f) {
    for (int k = 0; k < frames; ++k) {
      sample.targets(f, k, 0) = 0.0;
      sample.targets(f, k, 1) = sample.mixture(f, offset + k);
    }
  }
  sample.source_id = other.source_id;
  sample.start_frame = other.start_frame;
  sample.replaced = true;
  ++stats.replaced;
  return true;
}

ExcerptBatch make_batch(Rng &rng, const SvsDataset *svs, const SvdDataset *svd,
                        int batch_size, Strategy strategy, SamplerStats *stats) {
  Require(batch_size > 0, ErrorCode::kInvalidArgument, "batch size must be positive");
  const bool needs_svs = strategy != Strategy::kSvdOnly;
  const bool needs_svd = strategy == Strategy::kSvdOnly || strategy == Strategy::kMtl ||
                         strategy == Strategy::kReplacement;
  Require(!needs_svs || (svs && svs->size() > 0), ErrorCode::kState,
          "mode " + to_string(strategy) + " needs a multitrack corpus");
  Require(!needs_svd || (svd && svd->size() > 0), ErrorCode::kState,
          "mode " + to_string(strategy) + " needs a labelled corpus");

  ExcerptBatch batch;
  SamplerStats local;
  SamplerStats &st = stats ? *stats : local;
  if (needs_svs) {
    const int frames = svs->geometry().input_frames;
    for (int b = 0; b < batch_size; ++b) {
      const auto track = static_cast<std::size_t>(
          UniformInt(rng, 0, static_cast<int>(svs->size()) - 1));
      const int start = UniformInt(rng, 0, svs->tracks()[track].frames() - frames);
      SvsSample s = svs->excerpt(track, start);
      if (strategy == Strategy::kReplacement)
        replacement_sampler(rng, s, svs->vocals_silent(track, start), svd,
                            static_cast<double>(svs->size()),
                            static_cast<double>(svd->size()), st);
      batch.svs.push_back(std::move(s));
    }
  }
  if (strategy == Strategy::kSvdOnly || strategy == Strategy::kMtl) {
    for (int b = 0; b < batch_size; ++b) batch.svd.push_back(svd->sample(rng));
  }
  return batch;
}

}  // namespace svsd
