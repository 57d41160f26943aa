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

// svsd command-line tool; a thin layer over the C API.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "svsd/svsd.h"

namespace {

using nlohmann::json;

constexpr int kUsageExit = 64;

// Thrown to leave main with a one-line error.
struct CliFailure {
  int exit_code;
  std::string kind;
  std::string message;
};

void Check(svsd_status status) {
  if (status != SVSD_OK)
    throw CliFailure{static_cast<int>(status), svsd_status_name(status), svsd_last_error()};
}

[[noreturn]] void Usage(const std::string &message) {
  throw CliFailure{kUsageExit, "usage", message};
}

// Prints and releases a JSON string from the library.
void Emit(char *text) {
  if (!text) return;
  std::cout << text << '\n';
  svsd_string_free(text);
}

class Model {
 public:
  explicit Model(const std::string &path) { Check(svsd_model_load(path.c_str(), &model_)); }
  ~Model() { svsd_model_free(model_); }
  Model(const Model &) = delete;
  Model &operator=(const Model &) = delete;
  const svsd_model *get() const { return model_; }

 private:
  svsd_model *model_ = nullptr;
};

std::string OneLine(std::string s) {
  for (char &c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

json ReadJsonFile(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw CliFailure{SVSD_ERR_IO, "io", "cannot open '" + path + "'"};
  try {
    return json::parse(in);
  } catch (const json::exception &e) {
    throw CliFailure{SVSD_ERR_FORMAT, "format", path + ": " + e.what()};
  }
}

struct TrainOptions {
  std::string config;
  std::optional<double> alpha;
  std::optional<std::string> mode;
  std::optional<std::string> loss;
  std::optional<std::uint64_t> seed;
  std::optional<int> batch_size;
  std::optional<double> lr;
  std::optional<long> max_iterations;
  std::optional<long> eval_interval;
  std::optional<long> patience;
  std::optional<int> base_channels;
  std::optional<std::string> train_corpus;
  std::optional<std::string> test_corpus;
  std::optional<std::string> checkpoint_dir;
  bool quiet = false;
};

template <typename T>
void Override(json &j, const char *key, const std::optional<T> &v) {
  if (v) j[key] = *v;
}

void RunTrain(const TrainOptions &o) {
  json j = o.config.empty() ? json::object() : ReadJsonFile(o.config);
  if (!j.is_object()) Usage("train config must be a JSON object");
  Override(j, "alpha", o.alpha);
  Override(j, "mode", o.mode);
  Override(j, "loss", o.loss);
  Override(j, "seed", o.seed);
  Override(j, "batch_size", o.batch_size);
  Override(j, "learning_rate", o.lr);
  Override(j, "max_iterations", o.max_iterations);
  Override(j, "eval_interval", o.eval_interval);
  Override(j, "patience_iterations", o.patience);
  Override(j, "train_corpus", o.train_corpus);
  Override(j, "test_corpus", o.test_corpus);
  Override(j, "checkpoint_dir", o.checkpoint_dir);
  if (o.base_channels) j["network"]["base_channels"] = *o.base_channels;
  char *summary = nullptr;
  const svsd_status status = svsd_train(j.dump().c_str(), o.quiet ? 0 : 1, &summary);
  Emit(summary);
  Check(status);
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Singing voice separation and detection"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(svsd_version()));

  TrainOptions train;
  auto *train_cmd = app.add_subcommand("train", "Train a model with early stopping");
  train_cmd->add_option("config", train.config, "JSON run configuration")
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--alpha", train.alpha, "Weight of the separation loss");
  train_cmd->add_option("--mode", train.mode, "svs | svd | mtl | replacement");
  train_cmd->add_option("--loss", train.loss, "naive | ml");
  train_cmd->add_option("--seed", train.seed);
  train_cmd->add_option("--batch-size", train.batch_size);
  train_cmd->add_option("--lr", train.lr, "Adam learning rate");
  train_cmd->add_option("--max-iterations", train.max_iterations, "0 runs until patience");
  train_cmd->add_option("--eval-interval", train.eval_interval);
  train_cmd->add_option("--patience", train.patience, "Iterations without improvement");
  train_cmd->add_option("--base-channels", train.base_channels);
  train_cmd->add_option("--train-corpus", train.train_corpus);
  train_cmd->add_option("--test-corpus", train.test_corpus);
  train_cmd->add_option("--checkpoint-dir", train.checkpoint_dir);
  train_cmd->add_flag("--quiet", train.quiet, "No progress rows on stderr");

  std::string checkpoint, input, output;
  int gl_iterations = 10;
  auto *separate_cmd = app.add_subcommand("separate", "Write vocals.wav and accompaniment.wav");
  separate_cmd->add_option("checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  separate_cmd->add_option("input", input, "WAV file")->required()->check(CLI::ExistingFile);
  separate_cmd->add_option("outdir", output)->required();
  separate_cmd->add_option("--griffin-lim", gl_iterations, "Phase refinement iterations")
      ->check(CLI::NonNegativeNumber);

  auto *detect_cmd = app.add_subcommand("detect", "Write per-frame vocal probabilities");
  detect_cmd->add_option("checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  detect_cmd->add_option("input", input, "WAV file")->required()->check(CLI::ExistingFile);
  output = "activity.csv";
  detect_cmd->add_option("-o,--output", output, "CSV path")->capture_default_str();

  std::string corpus, baseline;
  bool no_separation = false;
  auto *evaluate_cmd = app.add_subcommand("evaluate", "Evaluate on a corpus test partition");
  evaluate_cmd->add_option("checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  evaluate_cmd->add_option("corpus", corpus)->required()->check(CLI::ExistingDirectory);
  evaluate_cmd->add_option("--baseline", baseline, "Checkpoint for significance tests")
      ->check(CLI::ExistingFile);
  evaluate_cmd->add_flag("--no-separation", no_separation, "Skip SDR/SIR/SAR");
  std::string out_dir;
  evaluate_cmd->add_option("--out", out_dir, "Directory for report.json and excerpts.csv");

  std::uint64_t seed = 0;
  auto *flaw_cmd =
      app.add_subcommand("flaw-demo", "Show SDR ignoring errors in silent-vocal excerpts");
  flaw_cmd->add_option("--corpus", corpus, "Corpus directory (default: built-in track)")
      ->check(CLI::ExistingDirectory);
  flaw_cmd->add_option("--checkpoint", checkpoint, "Model for the estimates")
      ->check(CLI::ExistingFile);
  flaw_cmd->add_option("--seed", seed);

  std::vector<std::string> corpora, names;
  auto *profile_cmd = app.add_subcommand("profile-bias", "Compare corpus statistics");
  profile_cmd->add_option("corpora", corpora)->required()->check(CLI::ExistingDirectory);
  profile_cmd->add_option("--name", names, "Display name per corpus, in order");
  profile_cmd->add_option("--out", out_dir, "Directory for bias.csv and bias_summary.json");

  std::string spec;
  auto *synth_cmd = app.add_subcommand("synth", "Generate a synthetic corpus");
  synth_cmd->add_option("outdir", output)->required();
  synth_cmd->add_option("--spec", spec, "JSON generator spec")->check(CLI::ExistingFile);
  synth_cmd->add_option("--seed", seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    std::cerr << "svsd: error[usage]: " << OneLine(e.what()) << '\n';
    return kUsageExit;
  }

  try {
    if (*train_cmd) {
      RunTrain(train);
    } else if (*separate_cmd) {
      Model model(checkpoint);
      Check(svsd_separate_file(model.get(), input.c_str(), output.c_str(), gl_iterations));
    } else if (*detect_cmd) {
      Model model(checkpoint);
      Check(svsd_detect_file(model.get(), input.c_str(), output.c_str()));
    } else if (*evaluate_cmd) {
      Model model(checkpoint);
      std::optional<Model> base;
      if (!baseline.empty()) base.emplace(baseline);
      char *report = nullptr;
      Check(svsd_evaluate(model.get(), corpus.c_str(), base ? base->get() : nullptr,
                          no_separation ? 0 : 1, out_dir.empty() ? nullptr : out_dir.c_str(),
                          &report));
      Emit(report);
    } else if (*flaw_cmd) {
      std::optional<Model> model;
      if (!checkpoint.empty()) model.emplace(checkpoint);
      char *report = nullptr;
      Check(svsd_flaw_demo(corpus.empty() ? nullptr : corpus.c_str(),
                           model ? model->get() : nullptr, seed, &report));
      Emit(report);
    } else if (*profile_cmd) {
      if (!names.empty() && names.size() != corpora.size())
        Usage("--name must be given once per corpus");
      std::vector<const char *> dirs, labels;
      for (const auto &c : corpora) dirs.push_back(c.c_str());
      for (const auto &n : names) labels.push_back(n.c_str());
      char *summary = nullptr;
      Check(svsd_profile_bias(dirs.data(), names.empty() ? nullptr : labels.data(),
                              dirs.size(), out_dir.empty() ? nullptr : out_dir.c_str(),
                              &summary));
      Emit(summary);
    } else if (*synth_cmd) {
      const std::string text = spec.empty() ? "" : ReadJsonFile(spec).dump();
      Check(svsd_synth(text.c_str(), seed, output.c_str()));
    }
  } catch (const CliFailure &f) {
    std::cerr << "svsd: error[" << f.kind << "]: " << OneLine(f.message) << '\n';
    return f.exit_code;
  }
  return 0;
}
