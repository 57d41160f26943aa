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

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "svsd/data.hpp"

namespace svsd {

struct SongProfile {
  std::string id;
  /// 10 log10(E_vocals / E_accompaniment); +inf when the accompaniment is
  /// silent, -inf when the vocals are. Absent for songs without stems.
  std::optional<double> ratio_db;
  double track_rms = 0.0;
  double activity_fraction = 0.0;
};

struct Quartiles {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  int count = 0;
};

/// Linear interpolation between order statistics (position p * (n - 1)).
Quartiles quartiles(std::vector<double> values);

struct BiasProfile {
  std::string corpus;
  std::vector<SongProfile> songs;
  std::optional<Quartiles> ratio_db;  // over finite ratios only
  Quartiles track_rms;
  Quartiles activity_fraction;
  int ratio_outliers = 0;  // infinite ratios left out of the summary
};

SongProfile profile_song(const MultiTrackSong &song);
/// Labelled mixtures have no stems: rms and label-derived activity only.
SongProfile profile_song(const LabeledMixtureSong &song);

BiasProfile profile_corpus(const std::string &name, const std::vector<SongProfile> &songs);
/// Profiles every song of a corpus, multitrack and labelled, both partitions.
BiasProfile profile_corpus(const std::string &name, const Corpus &corpus);

/// `corpus,song,ratio_db,rms,activity_fraction`; empty ratio for songs
/// without stems, inf/-inf for silent stems.
void write_bias_csv(std::ostream &out, const std::vector<BiasProfile> &profiles);

nlohmann::json to_json(const BiasProfile &profile);
/// Summary per corpus plus a property-by-corpus table of medians.
nlohmann::json compare(const std::vector<BiasProfile> &profiles);

}  // namespace svsd
