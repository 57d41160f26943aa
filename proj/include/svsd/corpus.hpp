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

#include <filesystem>

#include "svsd/data.hpp"

namespace svsd {

// On-disk layout:
//   <root>/manifest.json   {"songs": [{"id", "kind", "partition"}, ...]}
//   <root>/<id>/mixture.wav, vocals.wav, accompaniment.wav   (kind "multitrack")
//   <root>/<id>/mixture.wav, labels.csv                      (kind "labeled")
// with partition "train" or "test".

void write_corpus(const std::filesystem::path &root, const Corpus &corpus);
Corpus load_corpus(const std::filesystem::path &root);

/// Header `frame,label`, one row per frame in order.
void write_labels_csv(const std::filesystem::path &path, const FrameLabels &labels);
FrameLabels read_labels_csv(const std::filesystem::path &path);

}  // namespace svsd
