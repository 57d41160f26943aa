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

#include "svsd/evaluate.hpp"

#include <cmath>

#include "svsd/error.hpp"
#include "svsd/loss.hpp"
#include "svsd/stats.hpp"

namespace svsd {
namespace {

nlohmann::json Optional(const std::optional<double> &v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

// Non-finite values are stored as null.
nlohmann::json Number(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

double ReadNumber(const nlohmann::json &j, const char *key) {
  const auto &v = j.at(key);
  return v.is_null() ? std::nan("") : v.get<double>();
}

std::optional<double> ReadOptional(const nlohmann::json &j, const char *key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<double>();
}

AudioClip AtModelRate(const AudioClip &clip) {
  return clip.sample_rate == kModelSampleRate ? clip : resample(clip, kModelSampleRate);
}

const std::vector<std::string> kSourceNames = {"vocals", "accompaniment"};

}  // namespace

nlohmann::json to_json(const EvalReport &r) {
  nlohmann::json sources = nlohmann::json::array();
  for (const auto &s : r.sources)
    sources.push_back({{"name", s.name},
                       {"sdr", Number(s.sdr)},
                       {"sir", Number(s.sir)},
                       {"sar", Number(s.sar)},
                       {"tracks", s.tracks}});
  nlohmann::json sig = nlohmann::json::array();
  for (const auto &s : r.significance)
    sig.push_back({{"test", s.test},
                   {"metric", s.metric},
                   {"statistic", Number(s.statistic)},
                   {"p", Number(s.p)}});
  return {{"mse", Optional(r.mse)},
          {"au_roc", Optional(r.au_roc)},
          {"sources", sources},
          {"nonvocal_rms", Optional(r.nonvocal_rms)},
          {"excluded_excerpts", r.excluded_excerpts},
          {"included_excerpts", r.included_excerpts},
          {"significance", sig}};
}

EvalReport eval_report_from_json(const nlohmann::json &j) {
  EvalReport r;
  r.mse = ReadOptional(j, "mse");
  r.au_roc = ReadOptional(j, "au_roc");
  r.nonvocal_rms = ReadOptional(j, "nonvocal_rms");
  r.excluded_excerpts = j.value("excluded_excerpts", 0);
  r.included_excerpts = j.value("included_excerpts", 0);
  for (const auto &s : j.value("sources", nlohmann::json::array()))
    r.sources.push_back({s.at("name").get<std::string>(), ReadNumber(s, "sdr"),
                         ReadNumber(s, "sir"), ReadNumber(s, "sar"),
                         s.at("tracks").get<int>()});
  for (const auto &s : j.value("significance", nlohmann::json::array()))
    r.significance.push_back({s.at("test").get<std::string>(),
                              s.at("metric").get<std::string>(),
                              ReadNumber(s, "statistic"), ReadNumber(s, "p")});
  return r;
}

std::vector<int> evaluation_starts(int frames, const WindowGeometry &g) {
  std::vector<int> starts;
  if (frames < g.input_frames) return starts;
  const int last = frames - g.input_frames;
  for (int s = 0; s <= last; s += g.output_frames) starts.push_back(s);
  if (starts.back() != last) starts.push_back(last);
  return starts;
}

double test_mse(const ParameterSet<float> &params, const std::vector<SvsTrack> &tracks) {
  const WindowGeometry g = WindowGeometry::from(params.config);
  const SvsDataset data(tracks, g);
  Require(data.size() > 0, ErrorCode::kState, "test_mse: no usable test tracks");
  ForwardRecord<float> record(params);
  double sum = 0.0;
  long count = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (int start : evaluation_starts(data.tracks()[i].frames(), g)) {
      const SvsSample s = data.excerpt(i, start);
      const ModelOutput o = forward(params, s.mixture, &record);
      sum += mse_loss(o.source_magnitudes, s.targets);
      ++count;
    }
  }
  return sum / static_cast<double>(count);
}

DetectionScores detection_scores(const ParameterSet<float> &params,
                                 const std::vector<SvdTrack> &tracks) {
  DetectionScores out;
  for (const auto &t : tracks) {
    const TrackPrediction p = predict_track(params, t.mixture.cast<double>());
    out.probs.insert(out.probs.end(), p.vocal_probs.begin(), p.vocal_probs.end());
    out.labels.insert(out.labels.end(), t.labels.begin(), t.labels.end());
  }
  return out;
}

EvalReport evaluate_model(const ParameterSet<float> &params, const Corpus &test,
                          const EvalConfig &config, EvalDetails *details) {
  Require(!test.multitrack_test.empty() || !test.labeled_test.empty(), ErrorCode::kState,
          "evaluate: the corpus has no test songs");
  EvalReport report;
  EvalDetails local;
  EvalDetails &d = details ? *details : local;
  d = EvalDetails{};

  if (!test.multitrack_test.empty()) {
    std::vector<SvsTrack> tracks;
    for (const auto &s : test.multitrack_test) tracks.push_back(prepare_svs_track(s));
    report.mse = test_mse(params, tracks);
  }

  if (!test.labeled_test.empty()) {
    std::vector<SvdTrack> tracks;
    for (const auto &s : test.labeled_test) tracks.push_back(prepare_svd_track(s));
    d.detection = detection_scores(params, tracks);
    std::size_t positives = 0;
    for (auto l : d.detection.labels) positives += l;
    if (positives > 0 && positives < d.detection.labels.size())
      report.au_roc = au_roc(d.detection.probs, d.detection.labels);
  }

  if (config.separation_metrics && !test.multitrack_test.empty()) {
    const std::size_t k = static_cast<std::size_t>(params.config.num_sources);
    std::vector<double> sum_sdr(k, 0.0), sum_sir(k, 0.0), sum_sar(k, 0.0);
    std::vector<int> tracks_with(k, 0);
    double rms_sum = 0.0;
    int rms_count = 0;
    for (const auto &song : test.multitrack_test) {
      const std::vector<AudioClip> refs = {AtModelRate(song.vocals),
                                           AtModelRate(song.accompaniment)};
      const auto est = separate(params, AtModelRate(song.mixture),
                                config.griffin_lim_iterations);
      TrackSeparation ts;
      ts.id = song.id;
      ts.bss = bss_eval(refs, est, config.bss);
      ts.nonvocal_rms = nonvocal_rms(est[0], ts.bss);
      report.excluded_excerpts += ts.bss.excluded_count;
      report.included_excerpts += ts.bss.included_count;
      if (ts.nonvocal_rms) {
        rms_sum += *ts.nonvocal_rms * ts.bss.excluded_count;
        rms_count += ts.bss.excluded_count;
      }
      if (ts.bss.included_count > 0) {
        for (std::size_t s = 0; s < k && s < ts.bss.sources; ++s) {
          const SourceMetrics m = ts.bss.mean(s);
          sum_sdr[s] += m.sdr;
          sum_sir[s] += m.sir;
          sum_sar[s] += m.sar;
          ++tracks_with[s];
        }
      }
      d.separation.push_back(std::move(ts));
    }
    for (std::size_t s = 0; s < k; ++s) {
      SourceSummary sum;
      sum.name = s < kSourceNames.size() ? kSourceNames[s] : std::to_string(s);
      sum.tracks = tracks_with[s];
      if (tracks_with[s] > 0) {
        sum.sdr = sum_sdr[s] / tracks_with[s];
        sum.sir = sum_sir[s] / tracks_with[s];
        sum.sar = sum_sar[s] / tracks_with[s];
      } else {
        sum.sdr = sum.sir = sum.sar = std::nan("");
      }
      report.sources.push_back(sum);
    }
    if (rms_count > 0) report.nonvocal_rms = rms_sum / rms_count;
  }
  return report;
}

std::vector<SignificanceResult> compare_models(const EvalDetails &candidate,
                                               const EvalDetails &baseline) {
  std::vector<SignificanceResult> out;
  if (!candidate.detection.probs.empty()) {
    Require(candidate.detection.labels == baseline.detection.labels, ErrorCode::kState,
            "compare: detection labels differ between the two evaluations");
    const DelongResult r = delong_test(candidate.detection.probs, baseline.detection.probs,
                                       candidate.detection.labels);
    out.push_back({"delong", "au_roc", r.z, r.p});
  }
  std::vector<double> a, b;
  Require(candidate.separation.size() == baseline.separation.size(), ErrorCode::kState,
          "compare: separation results cover different tracks");
  for (std::size_t t = 0; t < candidate.separation.size(); ++t) {
    const auto &ca = candidate.separation[t].bss;
    const auto &cb = baseline.separation[t].bss;
    for (std::size_t e = 0; e < ca.excerpts.size() && e < cb.excerpts.size(); ++e) {
      if (ca.excerpts[e].excluded || cb.excerpts[e].excluded) continue;
      a.push_back(ca.excerpts[e].sources[0].sdr);
      b.push_back(cb.excerpts[e].sources[0].sdr);
    }
  }
  if (!a.empty()) {
    const WilcoxonResult w = wilcoxon_signed_rank(a, b);
    out.push_back({"wilcoxon", "sdr_vocals", w.statistic, w.p});
  }
  return out;
}

void write_excerpt_table(std::ostream &out, const EvalDetails &details) {
  write_excerpt_csv_header(out);
  for (const auto &t : details.separation)
    write_excerpt_csv(out, t.id, kSourceNames, t.bss);
}

}  // namespace svsd
