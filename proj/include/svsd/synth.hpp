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
#include <string>
#include <vector>

#include <json.hpp>

#include "svsd/data.hpp"

namespace svsd {

/// Parameters of a generated corpus. Levels are RMS over the active parts
/// in dBFS; each song draws its level uniformly from the range.
struct SynthSpec {
  int multitrack_songs = 20;
  int labeled_songs = 20;
  int test_multitrack_songs = 5;
  int test_labeled_songs = 5;
  double duration_seconds = 30.0;
  double vocal_level_db_min = -24.0;
  double vocal_level_db_max = -18.0;
  double accompaniment_level_db_min = -24.0;
  double accompaniment_level_db_max = -18.0;
  double vocal_fraction = 0.6;
  int sample_rate = kModelSampleRate;
  std::string id_prefix = "song";
};

nlohmann::json to_json(const SynthSpec &spec);
SynthSpec synth_spec_from_json(const nlohmann::json &j);

/// Vocals are vibrato harmonic tones with note envelopes separated by exact
/// silence; accompaniment is low-passed noise plus chord pads. Mixtures are
/// the exact sum of the stems and labels come from label_activity on the
/// vocal stem.
Corpus generate_synthetic_corpus(Rng &rng, const SynthSpec &spec);

/// One song of the generator; exposed for tests.
MultiTrackSong synthesize_song(Rng &rng, const SynthSpec &spec, const std::string &id);
/// Mixture of a generated song with labels from its vocal stem.
LabeledMixtureSong to_labeled(MultiTrackSong song);

/// Two-minute song whose vocal stem is zeroed from 90 s on, so the last
/// 30 s excerpt of the evaluation grid has silent vocals.
MultiTrackSong flaw_demo_track(std::uint64_t seed);

/// Stand-in separator output: each estimate is its reference plus
/// `leakage` times the other stems.
std::vector<AudioClip> leaky_estimates(const MultiTrackSong &song, double leakage);

}  // namespace svsd
