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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "svsd/bias.hpp"
#include "svsd/error.hpp"
#include "test_util.hpp"

using namespace svsd;
using namespace svsd::testing;

namespace {

MultiTrackSong Song(const std::string &id, std::vector<double> v, std::vector<double> a) {
  MultiTrackSong s;
  s.id = id;
  s.vocals = {std::move(v), 22050};
  s.accompaniment = {std::move(a), 22050};
  s.mixture.sample_rate = 22050;
  for (std::size_t i = 0; i < s.vocals.size(); ++i)
    s.mixture.samples.push_back(s.vocals.samples[i] + s.accompaniment.samples[i]);
  return s;
}

}  // namespace

TEST_SUITE("bias") {

TEST_CASE("equal energy gives 0 dB") {
  std::mt19937_64 rng(1);
  const auto v = RandomVector(rng, 22050);
  auto a = v;
  std::reverse(a.begin(), a.end());
  const SongProfile p = profile_song(Song("x", v, a));
  REQUIRE(p.ratio_db.has_value());
  CHECK(std::abs(*p.ratio_db) < 1e-12);
}

TEST_CASE("silent vocals") {
  std::mt19937_64 rng(2);
  const SongProfile p = profile_song(Song("s", std::vector<double>(22050, 0.0), RandomVector(rng, 22050)));
  REQUIRE(p.ratio_db.has_value());
  CHECK(std::isinf(*p.ratio_db));
  CHECK(*p.ratio_db < 0);
  CHECK(p.activity_fraction == 0.0);
  const BiasProfile b = profile_corpus("c", std::vector<SongProfile>{p});
  CHECK(b.ratio_outliers == 1);
  CHECK_FALSE(b.ratio_db.has_value());
  std::ostringstream csv;
  write_bias_csv(csv, {b});
  CHECK(csv.str().find("c,s,-inf,") != std::string::npos);
}

TEST_CASE("labelled songs have no ratio") {
  LabeledMixtureSong l;
  l.id = "l";
  l.mixture = {std::vector<double>(1000, 0.5), 22050};
  l.frame_labels = {1, 0, 0, 1};
  const SongProfile p = profile_song(l);
  CHECK_FALSE(p.ratio_db.has_value());
  CHECK(p.track_rms == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(p.activity_fraction == 0.5);
}

TEST_CASE("quartiles") {
  const Quartiles one = quartiles({4.0});
  CHECK(one.min == 4.0);
  CHECK(one.q1 == 4.0);
  CHECK(one.median == 4.0);
  CHECK(one.max == 4.0);
  const Quartiles q = quartiles({5.0, 1.0, 3.0, 2.0, 4.0});
  CHECK(q.q1 == 2.0);
  CHECK(q.median == 3.0);
  CHECK(q.q3 == 4.0);
  const Quartiles even = quartiles({1.0, 2.0, 3.0, 4.0});
  CHECK(even.median == 2.5);
  CHECK(even.q1 == 1.75);
  CHECK_THROWS_AS(quartiles({}), Error);
}

TEST_CASE("loud-vocal corpus ranks above quiet-vocal corpus") {
  std::mt19937_64 rng(3);
  std::vector<SongProfile> loud, quiet;
  for (int i = 0; i < 6; ++i) {
    const auto v = RandomVector(rng, 8000), a = RandomVector(rng, 8000);
    auto scaled = [](std::vector<double> x, double g) {
      for (double &s : x) s *= g;
      return x;
    };
    loud.push_back(profile_song(Song("l" + std::to_string(i), v, scaled(a, 0.3))));
    quiet.push_back(profile_song(Song("q" + std::to_string(i), scaled(v, 0.3), a)));
  }
  const BiasProfile bl = profile_corpus("loud", loud), bq = profile_corpus("quiet", quiet);
  CHECK(bl.ratio_db->median > bq.ratio_db->median);
  const auto j = compare({bl, bq});
  CHECK(j["medians"]["ratio_db"]["loud"].get<double>() > j["medians"]["ratio_db"]["quiet"].get<double>());
  CHECK(j["corpora"].size() == 2);
}

TEST_CASE("summary is invariant to song order and ratio to common scaling") {
  std::mt19937_64 rng(4);
  std::vector<MultiTrackSong> songs;
  for (int i = 0; i < 5; ++i)
    songs.push_back(Song("s" + std::to_string(i), RandomVector(rng, 4000, -0.5, 0.5),
                         RandomVector(rng, 4000)));
  std::vector<SongProfile> forward, backward;
  for (const auto &s : songs) forward.push_back(profile_song(s));
  for (auto it = songs.rbegin(); it != songs.rend(); ++it) backward.push_back(profile_song(*it));
  const BiasProfile f = profile_corpus("c", forward), b = profile_corpus("c", backward);
  CHECK(f.ratio_db->median == b.ratio_db->median);
  CHECK(f.track_rms.q1 == b.track_rms.q1);
  CHECK(f.activity_fraction.q3 == b.activity_fraction.q3);

  for (auto &s : songs) {
    for (double &x : s.vocals.samples) x *= 0.25;
    for (double &x : s.accompaniment.samples) x *= 0.25;
  }
  for (std::size_t i = 0; i < songs.size(); ++i)
    CHECK(*profile_song(songs[i]).ratio_db == doctest::Approx(*forward[i].ratio_db).epsilon(1e-12));
}

}  // TEST_SUITE
