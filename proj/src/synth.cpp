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

#include "svsd/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "svsd/error.hpp"

namespace svsd {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double Uniform(Rng &rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double MidiToHz(double midi) { return 440.0 * std::pow(2.0, (midi - 69.0) / 12.0); }

double DbToAmplitude(double db) { return std::pow(10.0, db / 20.0); }

// Active spans (begin, end) in samples covering `fraction` of each block.
std::vector<std::pair<std::size_t, std::size_t>> VocalSpans(Rng &rng, std::size_t n,
                                                            int rate, double fraction) {
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  if (fraction <= 0.0) return spans;
  std::size_t pos = 0;
  while (pos < n) {
    const auto block = static_cast<std::size_t>(Uniform(rng, 1.5, 3.5) * rate);
    const std::size_t end = std::min(n, pos + block);
    const auto active = static_cast<std::size_t>(std::llround(fraction * (end - pos)));
    const bool vocal_first = std::bernoulli_distribution(0.5)(rng);
    if (active > 0) {
      if (vocal_first)
        spans.emplace_back(pos, pos + active);
      else
        spans.emplace_back(end - active, end);
    }
    pos = end;
  }
  return spans;
}

void AddPhrase(Rng &rng, std::vector<double> &out, std::size_t begin, std::size_t end,
               int rate) {
  const double fade = 0.01 * rate;
  double phase = 0.0;
  std::size_t pos = begin;
  const double tilt = Uniform(rng, 0.6, 1.2);
  while (pos < end) {
    const auto len = std::min<std::size_t>(
        end - pos, static_cast<std::size_t>(Uniform(rng, 0.2, 0.6) * rate));
    const double f0 = MidiToHz(std::floor(Uniform(rng, 50.0, 75.0)));
    const double vibrato_rate = Uniform(rng, 4.5, 6.5);
    const double vibrato_depth = Uniform(rng, 0.005, 0.02);
    const int harmonics = std::max(1, std::min(10, static_cast<int>(4000.0 / f0)));
    for (std::size_t i = 0; i < len; ++i) {
      const double t = static_cast<double>(i) / rate;
      const double u = static_cast<double>(i) / static_cast<double>(len);
      const double env = 0.4 + 0.6 * std::sin(std::numbers::pi * u);
      const double inst = f0 * (1.0 + vibrato_depth * std::sin(kTwoPi * vibrato_rate * t));
      phase += kTwoPi * inst / rate;
      double v = 0.0;
      for (int h = 1; h <= harmonics; ++h)
        v += std::sin(h * phase) / std::pow(static_cast<double>(h), tilt);
      const std::size_t k = pos + i;
      const double edge = std::min({1.0, (k - begin + 1) / fade, (end - k) / fade});
      out[k] += env * edge * v;
    }
    pos += len;
  }
}

std::vector<double> Vocals(Rng &rng, std::size_t n, int rate, double fraction,
                           double level_db) {
  std::vector<double> v(n, 0.0);
  std::size_t active = 0;
  for (const auto &[b, e] : VocalSpans(rng, n, rate, fraction)) {
    AddPhrase(rng, v, b, e, rate);
    active += e - b;
  }
  if (active == 0) return v;
  double energy = 0.0;
  for (double x : v) energy += x * x;
  const double rms = std::sqrt(energy / static_cast<double>(active));
  if (rms > 0.0) {
    const double gain = DbToAmplitude(level_db) / rms;
    for (double &x : v) x *= gain;
  }
  return v;
}

std::vector<double> Accompaniment(Rng &rng, std::size_t n, int rate, double level_db) {
  std::vector<double> a(n, 0.0);
  std::normal_distribution<double> white(0.0, 1.0);
  const double pole = Uniform(rng, 0.85, 0.97);
  double state = 0.0;
  const double noise_gain = Uniform(rng, 0.2, 0.5);
  for (std::size_t i = 0; i < n; ++i) {
    state = pole * state + (1.0 - pole) * white(rng);
    a[i] = noise_gain * state * 4.0;
  }
  const auto chord_len = static_cast<std::size_t>(2.0 * rate);
  for (std::size_t pos = 0; pos < n; pos += chord_len) {
    const double root = std::floor(Uniform(rng, 40.0, 55.0));
    const bool minor = std::bernoulli_distribution(0.5)(rng);
    const double notes[3] = {root, root + (minor ? 3.0 : 4.0), root + 7.0};
    const std::size_t end = std::min(n, pos + chord_len);
    for (double note : notes) {
      const double f = MidiToHz(note) * (1.0 + Uniform(rng, -0.002, 0.002));
      const double phase0 = Uniform(rng, 0.0, kTwoPi);
      for (std::size_t i = pos; i < end; ++i) {
        const double t = static_cast<double>(i - pos) / rate;
        const double env = std::min(1.0, t / 0.05) * std::exp(-0.3 * t);
        const double ph = kTwoPi * f * t + phase0;
        a[i] += 0.3 * env * (std::sin(ph) + 0.5 * std::sin(2.0 * ph) +
                             0.25 * std::sin(3.0 * ph));
      }
    }
  }
  double energy = 0.0;
  for (double x : a) energy += x * x;
  const double rms = std::sqrt(energy / static_cast<double>(std::max<std::size_t>(n, 1)));
  if (rms > 0.0) {
    const double gain = DbToAmplitude(level_db) / rms;
    for (double &x : a) x *= gain;
  }
  return a;
}

}  // namespace

nlohmann::json to_json(const SynthSpec &s) {
  return {{"multitrack_songs", s.multitrack_songs},
          {"labeled_songs", s.labeled_songs},
          {"test_multitrack_songs", s.test_multitrack_songs},
          {"test_labeled_songs", s.test_labeled_songs},
          {"duration_seconds", s.duration_seconds},
          {"vocal_level_db_min", s.vocal_level_db_min},
          {"vocal_level_db_max", s.vocal_level_db_max},
          {"accompaniment_level_db_min", s.accompaniment_level_db_min},
          {"accompaniment_level_db_max", s.accompaniment_level_db_max},
          {"vocal_fraction", s.vocal_fraction},
          {"sample_rate", s.sample_rate},
          {"id_prefix", s.id_prefix}};
}

SynthSpec synth_spec_from_json(const nlohmann::json &j) {
  SynthSpec s;
  s.multitrack_songs = j.value("multitrack_songs", s.multitrack_songs);
  s.labeled_songs = j.value("labeled_songs", s.labeled_songs);
  s.test_multitrack_songs = j.value("test_multitrack_songs", s.test_multitrack_songs);
  s.test_labeled_songs = j.value("test_labeled_songs", s.test_labeled_songs);
  s.duration_seconds = j.value("duration_seconds", s.duration_seconds);
  s.vocal_level_db_min = j.value("vocal_level_db_min", s.vocal_level_db_min);
  s.vocal_level_db_max = j.value("vocal_level_db_max", s.vocal_level_db_max);
  s.accompaniment_level_db_min =
      j.value("accompaniment_level_db_min", s.accompaniment_level_db_min);
  s.accompaniment_level_db_max =
      j.value("accompaniment_level_db_max", s.accompaniment_level_db_max);
  s.vocal_fraction = j.value("vocal_fraction", s.vocal_fraction);
  s.sample_rate = j.value("sample_rate", s.sample_rate);
  s.id_prefix = j.value("id_prefix", s.id_prefix);
  return s;
}

MultiTrackSong synthesize_song(Rng &rng, const SynthSpec &spec, const std::string &id) {
  Require(spec.duration_seconds > 0 && spec.sample_rate > 0, ErrorCode::kInvalidArgument,
          "synth: duration and sample rate must be positive");
  Require(spec.vocal_fraction >= 0.0 && spec.vocal_fraction <= 1.0,
          ErrorCode::kInvalidArgument, "synth: vocal_fraction must lie in [0, 1]");
  const auto n = static_cast<std::size_t>(std::llround(spec.duration_seconds * spec.sample_rate));
  const double vocal_db = Uniform(rng, spec.vocal_level_db_min,
                                  std::max(spec.vocal_level_db_min, spec.vocal_level_db_max));
  const double acc_db =
      Uniform(rng, spec.accompaniment_level_db_min,
              std::max(spec.accompaniment_level_db_min, spec.accompaniment_level_db_max));
  MultiTrackSong song;
  song.id = id;
  song.vocals = {Vocals(rng, n, spec.sample_rate, spec.vocal_fraction, vocal_db),
                 spec.sample_rate};
  song.accompaniment = {Accompaniment(rng, n, spec.sample_rate, acc_db), spec.sample_rate};
  song.mixture.sample_rate = spec.sample_rate;
  song.mixture.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    song.mixture.samples[i] = song.vocals.samples[i] + song.accompaniment.samples[i];
  return song;
}

LabeledMixtureSong to_labeled(MultiTrackSong song) {
  LabeledMixtureSong l;
  l.id = std::move(song.id);
  l.frame_labels = label_activity(song.vocals.sample_rate == kModelSampleRate
                                      ? song.vocals
                                      : resample(song.vocals, kModelSampleRate));
  l.mixture = std::move(song.mixture);
  return l;
}

Corpus generate_synthetic_corpus(Rng &rng, const SynthSpec &spec) {
  Corpus c;
  const std::string &p = spec.id_prefix;
  for (int i = 0; i < spec.multitrack_songs; ++i)
    c.multitrack_train.push_back(synthesize_song(rng, spec, p + "_mt" + std::to_string(i)));
  for (int i = 0; i < spec.test_multitrack_songs; ++i)
    c.multitrack_test.push_back(
        synthesize_song(rng, spec, p + "_mt_test" + std::to_string(i)));
  for (int i = 0; i < spec.labeled_songs; ++i)
    c.labeled_train.push_back(
        to_labeled(synthesize_song(rng, spec, p + "_lb" + std::to_string(i))));
  for (int i = 0; i < spec.test_labeled_songs; ++i)
    c.labeled_test.push_back(
        to_labeled(synthesize_song(rng, spec, p + "_lb_test" + std::to_string(i))));
  return c;
}

MultiTrackSong flaw_demo_track(std::uint64_t seed) {
  Rng rng(seed);
  SynthSpec spec;
  spec.duration_seconds = 120.0;
  MultiTrackSong song = synthesize_song(rng, spec, "flaw_demo");
  const auto silent_from = static_cast<std::size_t>(90 * spec.sample_rate);
  for (std::size_t i = silent_from; i < song.vocals.samples.size(); ++i) {
    song.vocals.samples[i] = 0.0;
    song.mixture.samples[i] = song.accompaniment.samples[i];
  }
  return song;
}

std::vector<AudioClip> leaky_estimates(const MultiTrackSong &song, double leakage) {
  AudioClip vocals = song.vocals;
  AudioClip accompaniment = song.accompaniment;
  for (std::size_t i = 0; i < vocals.samples.size(); ++i) {
    vocals.samples[i] += leakage * song.accompaniment.samples[i];
    accompaniment.samples[i] += leakage * song.vocals.samples[i];
  }
  return {vocals, accompaniment};
}

}  // namespace svsd
