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

#include "svsd/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "svsd/corpus.hpp"
#include "svsd/error.hpp"
#include "svsd/evaluate.hpp"
#include "svsd/json_io.hpp"
#include "svsd/stats.hpp"

namespace svsd {
namespace fs = std::filesystem;
namespace {

std::string FormatNumber(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// Weights of the two task losses in the optimised objective and the
// gradient of the objective with respect to log_sigma.
struct Objective {
  double w_mse = 0.0;
  double w_ce = 0.0;
};

Objective ObjectiveWeights(const RunConfig &c, const ParameterSet<float> &params,
                           double n, double m) {
  switch (c.mode) {
    case Strategy::kSvsOnly:
    case Strategy::kReplacement:
      return {1.0, 0.0};
    case Strategy::kSvdOnly:
      return {0.0, 1.0};
    case Strategy::kMtl:
      if (c.loss == LossVariant::kMaximumLikelihood) {
        const MlLoss l = ml_loss(0.0, 0.0, params.log_sigma, n, m, c.network.fft_bins);
        return {l.d_mse, l.d_ce};
      }
      return {c.alpha, 1.0 - c.alpha};
  }
  return {1.0, 0.0};
}

struct EvalPoint {
  std::optional<double> test_mse;
  std::optional<double> au_roc;
};

EvalPoint Evaluate(const ParameterSet<float> &params, const std::vector<SvsTrack> &svs,
                   const std::vector<SvdTrack> &svd) {
  EvalPoint e;
  if (!svs.empty()) e.test_mse = test_mse(params, svs);
  if (!svd.empty()) {
    const DetectionScores s = detection_scores(params, svd);
    std::size_t pos = 0;
    for (auto l : s.labels) pos += l;
    if (pos > 0 && pos < s.labels.size()) e.au_roc = au_roc(s.probs, s.labels);
  }
  return e;
}

}  // namespace

void RunConfig::validate() const {
  Require(alpha >= 0.0 && alpha <= 1.0, ErrorCode::kInvalidArgument,
          "config: alpha must lie in [0, 1]");
  Require(batch_size > 0, ErrorCode::kInvalidArgument, "config: batch_size must be positive");
  Require(learning_rate > 0.0 && std::isfinite(learning_rate), ErrorCode::kInvalidArgument,
          "config: learning_rate must be positive");
  Require(eval_interval > 0, ErrorCode::kInvalidArgument,
          "config: eval_interval must be positive");
  Require(patience_iterations > 0 && patience_iterations % eval_interval == 0,
          ErrorCode::kInvalidArgument,
          "config: patience_iterations must be a positive multiple of eval_interval");
  Require(max_iterations >= 0, ErrorCode::kInvalidArgument,
          "config: max_iterations must not be negative");
  Require(loss == LossVariant::kNaive || mode == Strategy::kMtl, ErrorCode::kInvalidArgument,
          "config: the ml loss combines both tasks and needs mode mtl");
  shape_chain(network);
}

LossVariant loss_variant_from_string(const std::string &name) {
  if (name == "naive") return LossVariant::kNaive;
  if (name == "ml") return LossVariant::kMaximumLikelihood;
  Fail(ErrorCode::kInvalidArgument, "unknown loss '" + name + "' (expected naive or ml)");
}

std::string to_string(LossVariant v) {
  return v == LossVariant::kNaive ? "naive" : "ml";
}

nlohmann::json to_json(const RunConfig &c) {
  return {{"mode", to_string(c.mode)},
          {"alpha", c.alpha},
          {"loss", to_string(c.loss)},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"seed", c.seed},
          {"eval_interval", c.eval_interval},
          {"patience_iterations", c.patience_iterations},
          {"max_iterations", c.max_iterations},
          {"train_corpus", c.train_corpus},
          {"test_corpus", c.test_corpus},
          {"checkpoint_dir", c.checkpoint_dir},
          {"network", to_json(c.network)}};
}

RunConfig run_config_from_json(const nlohmann::json &j) {
  RunConfig c;
  try {
    if (j.contains("mode")) c.mode = strategy_from_string(j["mode"].get<std::string>());
    if (j.contains("loss")) c.loss = loss_variant_from_string(j["loss"].get<std::string>());
    c.alpha = j.value("alpha", c.alpha);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.seed = j.value("seed", c.seed);
    c.eval_interval = j.value("eval_interval", c.eval_interval);
    c.patience_iterations = j.value("patience_iterations", c.patience_iterations);
    c.max_iterations = j.value("max_iterations", c.max_iterations);
    c.train_corpus = j.value("train_corpus", c.train_corpus);
    c.test_corpus = j.value("test_corpus", c.test_corpus);
    c.checkpoint_dir = j.value("checkpoint_dir", c.checkpoint_dir);
    if (j.contains("network")) c.network = network_config_from_json(j["network"]);
  } catch (const nlohmann::json::exception &e) {
    Fail(ErrorCode::kFormat, std::string("config: ") + e.what());
  }
  return c;
}

void write_log_header(std::ostream &out) { out << "iteration,mse,ce,mtl,au_roc,test_mse\n"; }

void write_log_row(std::ostream &out, const LogRow &r) {
  out << r.iteration << ',' << FormatNumber(r.mse) << ',' << FormatNumber(r.ce) << ','
      << FormatNumber(r.mtl) << ',' << (r.au_roc ? FormatNumber(*r.au_roc) : "") << ','
      << (r.test_mse ? FormatNumber(*r.test_mse) : "") << '\n';
}

TrainResult train(const RunConfig &config, const Corpus &train_corpus, const Corpus &test,
                  std::ostream *progress) {
  config.validate();
  const WindowGeometry geometry = WindowGeometry::from(config.network);

  std::vector<SvsTrack> svs_tracks;
  for (const auto &s : train_corpus.multitrack_train) svs_tracks.push_back(prepare_svs_track(s));
  std::vector<SvdTrack> svd_tracks;
  for (const auto &s : train_corpus.labeled_train) svd_tracks.push_back(prepare_svd_track(s));
  const SvsDataset svs(std::move(svs_tracks), geometry);
  const SvdDataset svd(std::move(svd_tracks), geometry);

  std::vector<SvsTrack> test_svs;
  for (const auto &s : test.multitrack_test) test_svs.push_back(prepare_svs_track(s));
  std::vector<SvdTrack> test_svd;
  for (const auto &s : test.labeled_test) test_svd.push_back(prepare_svd_track(s));
  Require(!test_svs.empty() || !test_svd.empty(), ErrorCode::kState,
          "train: no test songs to select models on");

  const bool write_files = !config.checkpoint_dir.empty();
  const fs::path dir = config.checkpoint_dir;
  std::ofstream log_file;
  if (write_files) {
    fs::create_directories(dir);
    log_file.open(dir / kLogFile, std::ios::trunc);
    Require(static_cast<bool>(log_file), ErrorCode::kIo,
            "cannot write " + (dir / kLogFile).string());
    write_log_header(log_file);
  }

  TrainResult result;
  Checkpoint ckpt;
  ckpt.params = build<float>(config.network, config.seed);
  ckpt.adam.config.learning_rate = config.learning_rate;
  ParameterSet<float> &params = ckpt.params;
  Rng rng(config.seed ^ 0x5DEECE66DULL);

  const double n_svs = static_cast<double>(svs.size());
  const double m_svd = static_cast<double>(svd.size());
  ForwardRecord<float> record(params);
  double sum_mse = 0.0, sum_ce = 0.0, sum_obj = 0.0;
  long since_row = 0;
  long last_improvement = 0;
  auto save = [&](const char *name) {
    if (write_files) save_checkpoint(dir / name, ckpt);
  };

  for (long it = 1;; ++it) {
    const ExcerptBatch batch =
        make_batch(rng, &svs, &svd, config.batch_size, config.mode, &result.sampler);
    const Objective w = ObjectiveWeights(config, params, n_svs, m_svd);
    ParamGrads grads = zero_grads(params.layers);
    double mse = 0.0, ce = 0.0;
    const double b_svs = static_cast<double>(batch.svs.size());
    const double b_svd = static_cast<double>(batch.svd.size());
    for (const auto &s : batch.svs) {
      const ModelOutput o = forward(params, s.mixture, &record);
      mse += mse_loss(o.source_magnitudes, s.targets) / b_svs;
      Tensor3<double> g = mse_gradient(o.source_magnitudes, s.targets, w.w_mse / b_svs);
      for (int f = 0; f < g.f(); ++f)
        for (int t = 0; t < g.t(); ++t) {
          const double mix = s.mixture(f, t + geometry.offset);
          for (int k = 0; k < g.c(); ++k) g(f, t, k) *= mix;
        }
      backward(params, record, g, {}, grads);
    }
    for (const auto &s : batch.svd) {
      const ModelOutput o = forward(params, s.mixture, &record);
      ce += ce_loss(o.vocal_probs, s.labels) / b_svd;
      backward(params, record, {}, ce_gradient(o.vocal_probs, s.labels, w.w_ce / b_svd),
               grads);
    }

    double objective = 0.0;
    std::vector<double> log_sigma_grad(1, 0.0);
    switch (config.mode) {
      case Strategy::kSvsOnly:
      case Strategy::kReplacement: objective = mse; break;
      case Strategy::kSvdOnly: objective = ce; break;
      case Strategy::kMtl:
        if (config.loss == LossVariant::kMaximumLikelihood) {
          const MlLoss l = ml_loss(mse, ce, params.log_sigma, n_svs, m_svd,
                                   config.network.fft_bins);
          objective = l.value;
          log_sigma_grad[0] = l.d_log_sigma;
        } else {
          objective = mtl_loss(mse, ce, config.alpha);
        }
        break;
    }

    try {
      Require(std::isfinite(objective), ErrorCode::kNumeric,
              "loss became non-finite at iteration " + std::to_string(it));
      const auto slots = parameter_slots(params, grads, log_sigma_grad);
      adam_step(slots, ckpt.adam);
    } catch (const Error &e) {
      result.diverged = true;
      result.divergence_message = e.what();
      result.iterations = it - 1;
      if (progress) *progress << "diverged: " << e.what() << '\n';
      break;
    }
    ckpt.iteration = it;
    result.iterations = it;
    sum_mse += mse;
    sum_ce += ce;
    sum_obj += objective;
    ++since_row;

    const bool at_eval = it % config.eval_interval == 0;
    const bool at_end = config.max_iterations > 0 && it >= config.max_iterations;
    if (!at_eval && !at_end) continue;

    LogRow row;
    row.iteration = it;
    row.mse = sum_mse / since_row;
    row.ce = sum_ce / since_row;
    row.mtl = sum_obj / since_row;
    sum_mse = sum_ce = sum_obj = 0.0;
    since_row = 0;
    const EvalPoint e = Evaluate(params, test_svs, test_svd);
    row.test_mse = e.test_mse;
    row.au_roc = e.au_roc;
    bool improved = false;
    if (e.test_mse && (!result.best_test_mse || *e.test_mse < *result.best_test_mse)) {
      result.best_test_mse = e.test_mse;
      result.best_test_mse_iteration = it;
      save(kBestMseCheckpoint);
      improved = true;
    }
    if (e.au_roc && (!result.best_au_roc || *e.au_roc > *result.best_au_roc)) {
      result.best_au_roc = e.au_roc;
      result.best_au_roc_iteration = it;
      save(kBestAurocCheckpoint);
      improved = true;
    }
    save(kLastCheckpoint);
    if (improved) last_improvement = it;
    result.log.push_back(row);
    if (write_files) {
      write_log_row(log_file, row);
      log_file.flush();
    }
    if (progress) write_log_row(*progress, row);
    if (at_end) break;
    if (it - last_improvement >= config.patience_iterations) {
      result.stopped_early = true;
      break;
    }
  }
  result.final_params = params;
  return result;
}

TrainResult train(const RunConfig &config, std::ostream *progress) {
  Require(!config.train_corpus.empty(), ErrorCode::kInvalidArgument,
          "config: train_corpus is not set");
  config.validate();
  const Corpus train_corpus = load_corpus(config.train_corpus);
  if (config.test_corpus.empty() || config.test_corpus == config.train_corpus)
    return train(config, train_corpus, train_corpus, progress);
  return train(config, train_corpus, load_corpus(config.test_corpus), progress);
}

}  // namespace svsd
