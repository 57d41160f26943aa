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
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "svsd/data.hpp"
#include "svsd/loss.hpp"
#include "svsd/model.hpp"

namespace svsd {

struct RunConfig {
  Strategy mode = Strategy::kMtl;
  double alpha = kDefaultAlpha;
  LossVariant loss = LossVariant::kNaive;
  int batch_size = 16;
  double learning_rate = 1e-4;
  std::uint64_t seed = 0;
  long eval_interval = 1000;
  long patience_iterations = 10000;
  long max_iterations = 0;  // 0: run until patience is exhausted
  std::string train_corpus;
  std::string test_corpus;  // empty: the test partition of train_corpus
  std::string checkpoint_dir;
  NetworkConfig network;

  /// Throws with the offending field on invalid combinations.
  void validate() const;
};

nlohmann::json to_json(const RunConfig &config);
/// Missing keys keep their defaults.
RunConfig run_config_from_json(const nlohmann::json &j);
LossVariant loss_variant_from_string(const std::string &name);
std::string to_string(LossVariant v);

struct LogRow {
  long iteration = 0;
  double mse = 0.0;  // training losses averaged since the previous row
  double ce = 0.0;
  double mtl = 0.0;  // the optimised objective
  std::optional<double> au_roc;
  std::optional<double> test_mse;
};

/// Header `iteration,mse,ce,mtl,au_roc,test_mse`; missing values are empty.
void write_log_header(std::ostream &out);
void write_log_row(std::ostream &out, const LogRow &row);

struct TrainResult {
  long iterations = 0;
  std::vector<LogRow> log;
  std::optional<double> best_test_mse;
  long best_test_mse_iteration = 0;
  std::optional<double> best_au_roc;
  long best_au_roc_iteration = 0;
  bool stopped_early = false;
  bool diverged = false;
  std::string divergence_message;
  SamplerStats sampler;
  ParameterSet<float> final_params;
};

/// File names inside the checkpoint directory.
inline constexpr const char *kLogFile = "train_log.csv";
inline constexpr const char *kBestMseCheckpoint = "best_mse.ckpt";
inline constexpr const char *kBestAurocCheckpoint = "best_auroc.ckpt";
inline constexpr const char *kLastCheckpoint = "last.ckpt";

/// Trains on the training partitions of `train` and evaluates on the test
/// partitions of `test` every eval_interval iterations. With a checkpoint
/// directory configured, writes the log and the best-MSE, best-AU-ROC and
/// last checkpoints there. A non-finite loss or gradient stops training and
/// leaves the last good checkpoint untouched.
TrainResult train(const RunConfig &config, const Corpus &train, const Corpus &test,
                  std::ostream *progress = nullptr);

/// Loads the corpora named in the configuration and trains.
TrainResult train(const RunConfig &config, std::ostream *progress = nullptr);

}  // namespace svsd
