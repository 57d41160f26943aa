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

#include "svsd/bss_eval.hpp"
#include "svsd/data.hpp"
#include "svsd/model.hpp"

namespace svsd {

struct SourceSummary {
  std::string name;
  double sdr = 0.0;
  double sir = 0.0;
  double sar = 0.0;
  int tracks = 0;  // tracks with at least one included excerpt

  friend bool operator==(const SourceSummary &, const SourceSummary &) = default;
};

struct SignificanceResult {
  std::string test;
  std::string metric;
  double statistic = 0.0;
  double p = 1.0;

  friend bool operator==(const SignificanceResult &, const SignificanceResult &) = default;
};

struct EvalReport {
  std::optional<double> mse;
  std::optional<double> au_roc;
  std::vector<SourceSummary> sources;
  std::optional<double> nonvocal_rms;
  int excluded_excerpts = 0;
  int included_excerpts = 0;
  std::vector<SignificanceResult> significance;

  friend bool operator==(const EvalReport &, const EvalReport &) = default;
};

nlohmann::json to_json(const EvalReport &report);
EvalReport eval_report_from_json(const nlohmann::json &j);

struct EvalConfig {
  bool separation_metrics = true;  // BSS metrics need full renders; slow
  BssConfig bss;
  int griffin_lim_iterations = kDefaultGriffinLimIterations;
};

/// Windows tiled at a hop of output_frames covering each track.
std::vector<int> evaluation_starts(int frames, const WindowGeometry &g);

/// Mean excerpt MSE between masked mixtures and targets, normalised space.
double test_mse(const ParameterSet<float> &params, const std::vector<SvsTrack> &tracks);

/// Frame probabilities of every labelled track, concatenated.
struct DetectionScores {
  std::vector<double> probs;
  FrameLabels labels;
};
DetectionScores detection_scores(const ParameterSet<float> &params,
                                 const std::vector<SvdTrack> &tracks);

/// Per-track separation results.
struct TrackSeparation {
  std::string id;
  BssResult bss;
  std::optional<double> nonvocal_rms;
};

/// Everything needed to compare two models.
struct EvalDetails {
  DetectionScores detection;
  std::vector<TrackSeparation> separation;
};

/// Test MSE over the multitrack test songs, AU-ROC over the labelled test
/// songs, BSS metrics per track averaged over included excerpts and the
/// non-vocal RMS.
EvalReport evaluate_model(const ParameterSet<float> &params, const Corpus &test,
                          const EvalConfig &config = {}, EvalDetails *details = nullptr);

/// DeLong on the frame probabilities and Wilcoxon on paired included
/// excerpt SDRs of the vocals, candidate vs baseline.
std::vector<SignificanceResult> compare_models(const EvalDetails &candidate,
                                               const EvalDetails &baseline);

/// Per-excerpt rows for all tracks.
void write_excerpt_table(std::ostream &out, const EvalDetails &details);

}  // namespace svsd
