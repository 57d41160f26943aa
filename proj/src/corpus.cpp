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

#include "svsd/corpus.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "svsd/error.hpp"

namespace svsd {
namespace fs = std::filesystem;
namespace {

void CheckId(const std::string &id) {
  Require(!id.empty() && id.find('/') == std::string::npos && id != "." && id != "..",
          ErrorCode::kFormat, "corpus: invalid song id '" + id + "'");
}

nlohmann::json Entry(const std::string &id, const char *kind, const char *partition) {
  return {{"id", id}, {"kind", kind}, {"partition", partition}};
}

}  // namespace

void write_labels_csv(const fs::path &path, const FrameLabels &labels) {
  std::ofstream out(path);
  Require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path.string());
  out << "frame,label\n";
  for (std::size_t t = 0; t < labels.size(); ++t)
    out << t << ',' << static_cast<int>(labels[t]) << '\n';
  Require(static_cast<bool>(out), ErrorCode::kIo, "write failed: " + path.string());
}

FrameLabels read_labels_csv(const fs::path &path) {
  std::ifstream in(path);
  Require(static_cast<bool>(in), ErrorCode::kIo, "cannot read " + path.string());
  std::string line;
  Require(static_cast<bool>(std::getline(in, line)), ErrorCode::kFormat,
          path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  Require(line == "frame,label", ErrorCode::kFormat,
          path.string() + ": expected header 'frame,label'");
  FrameLabels labels;
  long row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    long frame = -1;
    int label = -1;
    char comma = 0;
    ss >> frame >> comma >> label;
    Require(ss && comma == ',' && frame == row && (label == 0 || label == 1),
            ErrorCode::kFormat,
            path.string() + ": bad row " + std::to_string(row + 2) + " '" + line + "'");
    labels.push_back(static_cast<std::uint8_t>(label));
    ++row;
  }
  return labels;
}

void write_corpus(const fs::path &root, const Corpus &corpus) {
  fs::create_directories(root);
  nlohmann::json songs = nlohmann::json::array();
  auto put_multitrack = [&](const std::vector<MultiTrackSong> &list, const char *part) {
    for (const auto &s : list) {
      CheckId(s.id);
      const fs::path dir = root / s.id;
      fs::create_directories(dir);
      save_audio(dir / "mixture.wav", s.mixture);
      save_audio(dir / "vocals.wav", s.vocals);
      save_audio(dir / "accompaniment.wav", s.accompaniment);
      songs.push_back(Entry(s.id, "multitrack", part));
    }
  };
  auto put_labeled = [&](const std::vector<LabeledMixtureSong> &list, const char *part) {
    for (const auto &s : list) {
      CheckId(s.id);
      const fs::path dir = root / s.id;
      fs::create_directories(dir);
      save_audio(dir / "mixture.wav", s.mixture);
      write_labels_csv(dir / "labels.csv", s.frame_labels);
      songs.push_back(Entry(s.id, "labeled", part));
    }
  };
  put_multitrack(corpus.multitrack_train, "train");
  put_multitrack(corpus.multitrack_test, "test");
  put_labeled(corpus.labeled_train, "train");
  put_labeled(corpus.labeled_test, "test");
  std::ofstream out(root / "manifest.json");
  Require(static_cast<bool>(out), ErrorCode::kIo,
          "cannot write " + (root / "manifest.json").string());
  out << nlohmann::json{{"songs", songs}}.dump(2) << '\n';
}

Corpus load_corpus(const fs::path &root) {
  const fs::path manifest_path = root / "manifest.json";
  std::ifstream in(manifest_path);
  Require(static_cast<bool>(in), ErrorCode::kIo,
          "cannot read corpus manifest " + manifest_path.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception &e) {
    Fail(ErrorCode::kFormat, manifest_path.string() + ": " + e.what());
  }
  Require(manifest.contains("songs") && manifest["songs"].is_array(), ErrorCode::kFormat,
          manifest_path.string() + ": missing 'songs' array");
  Corpus corpus;
  for (const auto &e : manifest["songs"]) {
    const std::string id = e.value("id", "");
    const std::string kind = e.value("kind", "");
    const std::string part = e.value("partition", "train");
    CheckId(id);
    Require(part == "train" || part == "test", ErrorCode::kFormat,
            "song '" + id + "': partition must be train or test");
    const bool train = part == "train";
    const fs::path dir = root / id;
    if (kind == "multitrack") {
      MultiTrackSong s;
      s.id = id;
      s.mixture = load_audio(dir / "mixture.wav");
      s.vocals = load_audio(dir / "vocals.wav");
      s.accompaniment = load_audio(dir / "accompaniment.wav");
      (train ? corpus.multitrack_train : corpus.multitrack_test).push_back(std::move(s));
    } else if (kind == "labeled") {
      LabeledMixtureSong s;
      s.id = id;
      s.mixture = load_audio(dir / "mixture.wav");
      s.frame_labels = read_labels_csv(dir / "labels.csv");
      (train ? corpus.labeled_train : corpus.labeled_test).push_back(std::move(s));
    } else {
      Fail(ErrorCode::kFormat,
           "song '" + id + "': kind must be multitrack or labeled, got '" + kind + "'");
    }
  }
  return corpus;
}

}  // namespace svsd
