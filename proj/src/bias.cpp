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

#include "svsd/bias.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "svsd/error.hpp"

namespace svsd {
namespace {

double Energy(const AudioClip &clip) {
  double e = 0.0;
  for (double x : clip.samples) e += x * x;
  return e;
}

double Rms(const AudioClip &clip) {
  if (clip.samples.empty()) return 0.0;
  return std::sqrt(Energy(clip) / static_cast<double>(clip.samples.size()));
}

double Fraction(const FrameLabels &labels) {
  if (labels.empty()) return 0.0;
  double active = 0.0;
  for (auto l : labels) active += l ? 1.0 : 0.0;
  return active / static_cast<double>(labels.size());
}

nlohmann::json QuartileJson(const Quartiles &q) {
  return {{"min", q.min}, {"q1", q.q1}, {"median", q.median},
          {"q3", q.q3},   {"max", q.max}, {"count", q.count}};
}

}  // namespace

Quartiles quartiles(std::vector<double> values) {
  Require(!values.empty(), ErrorCode::kInvalidArgument, "quartiles of an empty set");
  std::sort(values.begin(), values.end());
  auto at = [&](double p) {
    const double pos = p * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double w = pos - static_cast<double>(lo);
    return values[lo] + w * (values[hi] - values[lo]);
  };
  Quartiles q;
  q.min = values.front();
  q.q1 = at(0.25);
  q.median = at(0.5);
  q.q3 = at(0.75);
  q.max = values.back();
  q.count = static_cast<int>(values.size());
  return q;
}

SongProfile profile_song(const MultiTrackSong &song) {
  SongProfile p;
  p.id = song.id;
  const double ev = Energy(song.vocals);
  const double ea = Energy(song.accompaniment);
  if (ea == 0.0) {
    p.ratio_db = ev == 0.0 ? std::numeric_limits<double>::quiet_NaN()
                           : std::numeric_limits<double>::infinity();
  } else if (ev == 0.0) {
    p.ratio_db = -std::numeric_limits<double>::infinity();
  } else {
    p.ratio_db = 10.0 * std::log10(ev / ea);
  }
  p.track_rms = Rms(song.mixture);
  p.activity_fraction = Fraction(window_activity(song.vocals));
  return p;
}

SongProfile profile_song(const LabeledMixtureSong &song) {
  SongProfile p;
  p.id = song.id;
  p.track_rms = Rms(song.mixture);
  p.activity_fraction = Fraction(song.frame_labels);
  return p;
}

BiasProfile profile_corpus(const std::string &name, const std::vector<SongProfile> &songs) {
  Require(!songs.empty(), ErrorCode::kInvalidArgument,
          "profile: corpus '" + name + "' has no songs");
  BiasProfile b;
  b.corpus = name;
  b.songs = songs;
  std::vector<double> ratios, rms, fraction;
  for (const auto &s : songs) {
    rms.push_back(s.track_rms);
    fraction.push_back(s.activity_fraction);
    if (!s.ratio_db) continue;
    if (std::isfinite(*s.ratio_db))
      ratios.push_back(*s.ratio_db);
    else
      ++b.ratio_outliers;
  }
  if (!ratios.empty()) b.ratio_db = quartiles(ratios);
  b.track_rms = quartiles(rms);
  b.activity_fraction = quartiles(fraction);
  return b;
}

BiasProfile profile_corpus(const std::string &name, const Corpus &corpus) {
  std::vector<SongProfile> songs;
  for (const auto *list : {&corpus.multitrack_train, &corpus.multitrack_test})
    for (const auto &s : *list) songs.push_back(profile_song(s));
  for (const auto *list : {&corpus.labeled_train, &corpus.labeled_test})
    for (const auto &s : *list) songs.push_back(profile_song(s));
  return profile_corpus(name, songs);
}

void write_bias_csv(std::ostream &out, const std::vector<BiasProfile> &profiles) {
  out << "corpus,song,ratio_db,rms,activity_fraction\n";
  for (const auto &p : profiles) {
    for (const auto &s : p.songs) {
      out << p.corpus << ',' << s.id << ',';
      if (s.ratio_db) {
        if (std::isnan(*s.ratio_db))
          out << "nan";
        else if (std::isinf(*s.ratio_db))
          out << (*s.ratio_db > 0 ? "inf" : "-inf");
        else
          out << *s.ratio_db;
      }
      out << ',' << s.track_rms << ',' << s.activity_fraction << '\n';
    }
  }
}

nlohmann::json to_json(const BiasProfile &p) {
  nlohmann::json j = {{"corpus", p.corpus},
                      {"songs", p.songs.size()},
                      {"track_rms", QuartileJson(p.track_rms)},
                      {"activity_fraction", QuartileJson(p.activity_fraction)},
                      {"ratio_outliers", p.ratio_outliers}};
  j["ratio_db"] = p.ratio_db ? QuartileJson(*p.ratio_db) : nlohmann::json(nullptr);
  return j;
}

nlohmann::json compare(const std::vector<BiasProfile> &profiles) {
  nlohmann::json corpora = nlohmann::json::array();
  nlohmann::json medians = {{"ratio_db", nlohmann::json::object()},
                            {"track_rms", nlohmann::json::object()},
                            {"activity_fraction", nlohmann::json::object()}};
  for (const auto &p : profiles) {
    corpora.push_back(to_json(p));
    medians["ratio_db"][p.corpus] =
        p.ratio_db ? nlohmann::json(p.ratio_db->median) : nlohmann::json(nullptr);
    medians["track_rms"][p.corpus] = p.track_rms.median;
    medians["activity_fraction"][p.corpus] = p.activity_fraction.median;
  }
  return {{"corpora", corpora}, {"medians", medians}};
}

}  // namespace svsd
