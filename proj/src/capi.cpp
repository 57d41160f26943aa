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

#include "svsd/svsd.h"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <new>
#include <string>
#include <vector>

#include <json.hpp>

#include "svsd/bias.hpp"
#include "svsd/bss_eval.hpp"
#include "svsd/corpus.hpp"
#include "svsd/error.hpp"
#include "svsd/evaluate.hpp"
#include "svsd/json_io.hpp"
#include "svsd/model.hpp"
#include "svsd/synth.hpp"
#include "svsd/train.hpp"

struct svsd_model {
  svsd::Checkpoint checkpoint;
};

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

thread_local std::string g_last_error;

const std::vector<double> kFlawAmplitudes = {0.01, 0.03, 0.1};
constexpr double kFlawLeakage = 0.1;

svsd_status Fail(svsd_status status, const std::string &message) {
  g_last_error = message;
  return status;
}

template <typename F>
svsd_status Guard(F &&body) {
  try {
    g_last_error.clear();
    body();
    return SVSD_OK;
  } catch (const svsd::Error &e) {
    return Fail(static_cast<svsd_status>(e.code()), e.what());
  } catch (const json::exception &e) {
    return Fail(SVSD_ERR_FORMAT, std::string("json: ") + e.what());
  } catch (const fs::filesystem_error &e) {
    return Fail(SVSD_ERR_IO, e.what());
  } catch (const std::bad_alloc &) {
    return Fail(SVSD_ERR_INTERNAL, "out of memory");
  } catch (const std::exception &e) {
    return Fail(SVSD_ERR_INTERNAL, e.what());
  } catch (...) {
    return Fail(SVSD_ERR_INTERNAL, "unknown exception");
  }
}

void Need(const void *p, const char *what) {
  svsd::Require(p != nullptr, svsd::ErrorCode::kInvalidArgument,
                std::string(what) + " must not be NULL");
}

char *CopyString(const std::string &s) {
  char *out = static_cast<char *>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void SetJson(char **out, const json &j) {
  if (out) *out = CopyString(j.dump(2));
}

json Nullable(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json Nullable(const std::optional<double> &v) {
  return v ? Nullable(*v) : json(nullptr);
}

svsd::AudioClip ToModelRate(svsd::AudioClip clip) {
  if (clip.sample_rate == svsd::kModelSampleRate) return clip;
  return svsd::resample(clip, svsd::kModelSampleRate);
}

// Back to the caller's rate and exact length.
svsd::AudioClip FromModelRate(const svsd::AudioClip &clip, int rate, std::size_t count) {
  svsd::AudioClip out = rate == clip.sample_rate ? clip : svsd::resample(clip, rate);
  out.samples.resize(count, 0.0);
  return out;
}

std::vector<svsd::AudioClip> Separate(const svsd_model *model, const svsd::AudioClip &clip,
                                      int gl_iterations) {
  svsd::Require(gl_iterations >= 0, svsd::ErrorCode::kInvalidArgument,
                "griffin_lim_iterations must be non-negative");
  auto sources =
      svsd::separate(model->checkpoint.params, ToModelRate(clip), gl_iterations);
  for (auto &s : sources) s = FromModelRate(s, clip.sample_rate, clip.size());
  return sources;
}

svsd::AudioClip MakeClip(const double *samples, std::size_t count, int rate) {
  Need(samples, "samples");
  svsd::Require(count > 0, svsd::ErrorCode::kInvalidArgument, "empty clip");
  svsd::Require(rate > 0, svsd::ErrorCode::kInvalidArgument, "sample rate must be positive");
  return {std::vector<double>(samples, samples + count), rate};
}

json FlawStepJson(const svsd::FlawStep &s) {
  return {{"amplitude", s.amplitude},
          {"mean_sdr_vocals", Nullable(s.mean_sdr_vocals)},
          {"mean_sdr_accompaniment", Nullable(s.mean_sdr_accompaniment)},
          {"delta_sdr_vocals", Nullable(s.delta_sdr_vocals)},
          {"nonvocal_rms", s.nonvocal_rms}};
}

json FlawJson(const svsd::FlawReport &r) {
  json steps = json::array();
  bool sdr_unchanged = true;
  bool rms_monotone = true;
  double prev_rms = r.baseline.nonvocal_rms;
  for (const auto &s : r.steps) {
    steps.push_back(FlawStepJson(s));
    sdr_unchanged = sdr_unchanged && s.mean_sdr_vocals == r.baseline.mean_sdr_vocals &&
                    s.mean_sdr_accompaniment == r.baseline.mean_sdr_accompaniment;
    rms_monotone = rms_monotone && s.nonvocal_rms > prev_rms;
    prev_rms = s.nonvocal_rms;
  }
  return {{"track", r.track},
          {"region_start_s", r.region_start_s},
          {"region_end_s", r.region_end_s},
          {"excluded_excerpts", r.excluded_count},
          {"included_excerpts", r.included_count},
          {"baseline", FlawStepJson(r.baseline)},
          {"steps", steps},
          {"sdr_unchanged", sdr_unchanged},
          {"nonvocal_rms_increasing", rms_monotone}};
}

std::vector<svsd::AudioClip> FlawEstimates(const svsd_model *model,
                                           const svsd::MultiTrackSong &song) {
  if (!model) return svsd::leaky_estimates(song, kFlawLeakage);
  return svsd::separate(model->checkpoint.params, song.mixture);
}

svsd::MultiTrackSong AtModelRate(svsd::MultiTrackSong song) {
  song.mixture = ToModelRate(std::move(song.mixture));
  song.vocals = ToModelRate(std::move(song.vocals));
  song.accompaniment = ToModelRate(std::move(song.accompaniment));
  return song;
}

// The first song (test partition first) whose evaluation grid leaves a
// region scored only by excluded excerpts.
svsd::FlawReport CorpusFlawDemo(const svsd::Corpus &corpus, const svsd_model *model,
                                std::uint64_t seed) {
  std::string last_error = "corpus has no multitrack songs";
  for (const auto *list : {&corpus.multitrack_test, &corpus.multitrack_train}) {
    for (const auto &raw : *list) {
      const svsd::MultiTrackSong song = AtModelRate(raw);
      const std::vector<svsd::AudioClip> refs = {song.vocals, song.accompaniment};
      const svsd::BssResult probe = svsd::bss_eval(refs, refs);
      if (probe.excluded_count == 0) continue;
      const auto [b, e] =
          svsd::excluded_only_region(probe, song.vocals.sample_rate, song.vocals.size());
      if (e <= b) {
        last_error = "song '" + song.id + "': excluded excerpts all overlap included ones";
        continue;
      }
      return svsd::flaw_demo(song.id, refs, FlawEstimates(model, song), kFlawAmplitudes,
                             seed);
    }
  }
  svsd::Fail(svsd::ErrorCode::kState,
             "flaw-demo: no song with a silent-vocal excerpt (" + last_error + ")");
}

}  // namespace

extern "C" {

const char *svsd_version(void) { return "1.0.0"; }

const char *svsd_status_name(svsd_status status) {
  switch (status) {
    case SVSD_OK: return "ok";
    case SVSD_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case SVSD_ERR_IO: return "io";
    case SVSD_ERR_FORMAT: return "format";
    case SVSD_ERR_SHAPE: return "shape";
    case SVSD_ERR_NUMERIC: return "numeric";
    case SVSD_ERR_STATE: return "state";
    case SVSD_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char *svsd_last_error(void) { return g_last_error.c_str(); }

void svsd_string_free(char *s) { std::free(s); }

svsd_status svsd_model_load(const char *checkpoint_path, svsd_model **out) {
  return Guard([&] {
    Need(checkpoint_path, "checkpoint_path");
    Need(out, "out");
    *out = nullptr;
    auto model = std::make_unique<svsd_model>();
    model->checkpoint = svsd::load_checkpoint(checkpoint_path);
    *out = model.release();
  });
}

void svsd_model_free(svsd_model *model) { delete model; }

svsd_status svsd_model_info(const svsd_model *model, char **out_json) {
  return Guard([&] {
    Need(model, "model");
    Need(out_json, "out_json");
    const auto &p = model->checkpoint.params;
    SetJson(out_json, {{"network", svsd::to_json(p.config)},
                       {"seed", p.seed},
                       {"iteration", model->checkpoint.iteration},
                       {"layers", p.layers.size()},
                       {"log_sigma", p.log_sigma}});
  });
}

svsd_status svsd_separate(const svsd_model *model, const double *samples, size_t count,
                          int sample_rate, int griffin_lim_iterations, double *vocals_out,
                          double *accompaniment_out) {
  return Guard([&] {
    Need(model, "model");
    Need(vocals_out, "vocals_out");
    Need(accompaniment_out, "accompaniment_out");
    const auto sources =
        Separate(model, MakeClip(samples, count, sample_rate), griffin_lim_iterations);
    std::copy(sources[0].samples.begin(), sources[0].samples.end(), vocals_out);
    std::copy(sources[1].samples.begin(), sources[1].samples.end(), accompaniment_out);
  });
}

svsd_status svsd_detect(const svsd_model *model, const double *samples, size_t count,
                        int sample_rate, double *probs_out, size_t capacity,
                        size_t *frames_out) {
  return Guard([&] {
    Need(model, "model");
    Need(frames_out, "frames_out");
    const auto probs = svsd::detect(model->checkpoint.params,
                                    ToModelRate(MakeClip(samples, count, sample_rate)));
    *frames_out = probs.size();
    if (!probs_out) return;
    svsd::Require(capacity >= probs.size(), svsd::ErrorCode::kShape,
                  "detect: output buffer holds " + std::to_string(capacity) +
                      " frames, need " + std::to_string(probs.size()));
    std::copy(probs.begin(), probs.end(), probs_out);
  });
}

svsd_status svsd_separate_file(const svsd_model *model, const char *input_wav,
                               const char *out_dir, int griffin_lim_iterations) {
  return Guard([&] {
    Need(model, "model");
    Need(input_wav, "input_wav");
    Need(out_dir, "out_dir");
    const auto sources = Separate(model, svsd::load_audio(input_wav), griffin_lim_iterations);
    fs::create_directories(out_dir);
    svsd::save_audio(fs::path(out_dir) / "vocals.wav", sources[0]);
    svsd::save_audio(fs::path(out_dir) / "accompaniment.wav", sources[1]);
  });
}

svsd_status svsd_detect_file(const svsd_model *model, const char *input_wav,
                             const char *activity_csv) {
  return Guard([&] {
    Need(model, "model");
    Need(input_wav, "input_wav");
    Need(activity_csv, "activity_csv");
    const auto probs =
        svsd::detect(model->checkpoint.params, ToModelRate(svsd::load_audio(input_wav)));
    const fs::path path(activity_csv);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    svsd::Require(static_cast<bool>(out), svsd::ErrorCode::kIo,
                  "cannot write '" + path.string() + "'");
    out << "frame,seconds,probability\n";
    const svsd::StftConfig stft;
    char line[96];
    for (std::size_t t = 0; t < probs.size(); ++t) {
      std::snprintf(line, sizeof line, "%zu,%.6f,%.9g\n", t,
                    svsd::frame_time(static_cast<int>(t), stft, svsd::kModelSampleRate),
                    probs[t]);
      out << line;
    }
    svsd::Require(static_cast<bool>(out), svsd::ErrorCode::kIo,
                  "write failed for '" + path.string() + "'");
  });
}

svsd_status svsd_train(const char *config_json, int verbose, char **summary_json) {
  svsd::TrainResult result;
  const svsd_status status = Guard([&] {
    Need(config_json, "config_json");
    const svsd::RunConfig config = svsd::run_config_from_json(json::parse(config_json));
    result = svsd::train(config, verbose ? &std::cerr : nullptr);
    json summary = {{"iterations", result.iterations},
                    {"best_test_mse", Nullable(result.best_test_mse)},
                    {"best_test_mse_iteration", result.best_test_mse_iteration},
                    {"best_au_roc", Nullable(result.best_au_roc)},
                    {"best_au_roc_iteration", result.best_au_roc_iteration},
                    {"stopped_early", result.stopped_early},
                    {"diverged", result.diverged},
                    {"replacement", {{"eligible", result.sampler.eligible},
                                     {"replaced", result.sampler.replaced},
                                     {"no_section", result.sampler.no_section}}}};
    if (result.diverged) summary["divergence"] = result.divergence_message;
    SetJson(summary_json, summary);
  });
  if (status == SVSD_OK && result.diverged)
    return Fail(SVSD_ERR_NUMERIC, "training diverged at iteration " +
                                      std::to_string(result.iterations) + ": " +
                                      result.divergence_message);
  return status;
}

svsd_status svsd_evaluate(const svsd_model *model, const char *corpus_dir,
                          const svsd_model *baseline, int separation_metrics,
                          const char *out_dir, char **report_json) {
  return Guard([&] {
    Need(model, "model");
    Need(corpus_dir, "corpus_dir");
    const svsd::Corpus corpus = svsd::load_corpus(corpus_dir);
    svsd::EvalConfig config;
    config.separation_metrics = separation_metrics != 0;
    svsd::EvalDetails details;
    svsd::EvalReport report =
        svsd::evaluate_model(model->checkpoint.params, corpus, config, &details);
    if (baseline) {
      svsd::EvalDetails base_details;
      svsd::evaluate_model(baseline->checkpoint.params, corpus, config, &base_details);
      report.significance = svsd::compare_models(details, base_details);
    }
    const json j = svsd::to_json(report);
    if (out_dir) {
      fs::create_directories(out_dir);
      std::ofstream(fs::path(out_dir) / "report.json") << j.dump(2) << '\n';
      std::ofstream csv(fs::path(out_dir) / "excerpts.csv");
      svsd::write_excerpt_table(csv, details);
      svsd::Require(static_cast<bool>(csv), svsd::ErrorCode::kIo,
                    "cannot write excerpts.csv in '" + std::string(out_dir) + "'");
    }
    SetJson(report_json, j);
  });
}

svsd_status svsd_flaw_demo(const char *corpus_dir, const svsd_model *model, uint64_t seed,
                           char **report_json) {
  return Guard([&] {
    svsd::FlawReport report;
    if (corpus_dir) {
      report = CorpusFlawDemo(svsd::load_corpus(corpus_dir), model, seed);
    } else {
      const svsd::MultiTrackSong song = svsd::flaw_demo_track(seed);
      report = svsd::flaw_demo(song.id, {song.vocals, song.accompaniment},
                               FlawEstimates(model, song), kFlawAmplitudes, seed);
    }
    SetJson(report_json, FlawJson(report));
  });
}

svsd_status svsd_profile_bias(const char *const *corpus_dirs, const char *const *names,
                              size_t count, const char *out_dir, char **summary_json) {
  return Guard([&] {
    Need(corpus_dirs, "corpus_dirs");
    svsd::Require(count > 0, svsd::ErrorCode::kInvalidArgument, "no corpora given");
    std::vector<svsd::BiasProfile> profiles;
    for (size_t i = 0; i < count; ++i) {
      Need(corpus_dirs[i], "corpus directory");
      std::string name = names && names[i] ? names[i] : "";
      if (name.empty()) name = fs::path(corpus_dirs[i]).lexically_normal().filename().string();
      if (name.empty()) name = corpus_dirs[i];
      profiles.push_back(svsd::profile_corpus(name, svsd::load_corpus(corpus_dirs[i])));
    }
    const json summary = svsd::compare(profiles);
    if (out_dir) {
      fs::create_directories(out_dir);
      std::ofstream csv(fs::path(out_dir) / "bias.csv");
      svsd::write_bias_csv(csv, profiles);
      std::ofstream(fs::path(out_dir) / "bias_summary.json") << summary.dump(2) << '\n';
      svsd::Require(static_cast<bool>(csv), svsd::ErrorCode::kIo,
                    "cannot write bias.csv in '" + std::string(out_dir) + "'");
    }
    SetJson(summary_json, summary);
  });
}

svsd_status svsd_synth(const char *spec_json, uint64_t seed, const char *out_dir) {
  return Guard([&] {
    Need(out_dir, "out_dir");
    const svsd::SynthSpec spec = svsd::synth_spec_from_json(
        spec_json && *spec_json ? json::parse(spec_json) : json::object());
    svsd::Rng rng(seed);
    svsd::write_corpus(out_dir, svsd::generate_synthetic_corpus(rng, spec));
    json record = svsd::to_json(spec);
    record["seed"] = seed;
    std::ofstream(fs::path(out_dir) / "synth_spec.json") << record.dump(2) << '\n';
  });
}

}  // extern "C"
