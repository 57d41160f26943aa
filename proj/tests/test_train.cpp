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

#include <fstream>
#include <sstream>

#include "svsd/error.hpp"
#include "svsd/synth.hpp"
#include "svsd/train.hpp"
#include "test_util.hpp"

using namespace svsd;
using namespace svsd::testing;

namespace {

const Corpus &TinyCorpus() {
  static const Corpus c = [] {
    SynthSpec spec;
    spec.multitrack_songs = 2;
    spec.labeled_songs = 2;
    spec.test_multitrack_songs = 1;
    spec.test_labeled_songs = 1;
    spec.duration_seconds = 6.0;
    Rng rng(17);
    return generate_synthetic_corpus(rng, spec);
  }();
  return c;
}

RunConfig Tiny(Strategy mode) {
  RunConfig c;
  c.mode = mode;
  c.batch_size = 2;
  c.learning_rate = 1e-3;
  c.seed = 3;
  c.eval_interval = 5;
  c.patience_iterations = 100;
  c.max_iterations = 10;
  c.network.base_channels = 4;
  return c;
}

std::string Slurp(const std::filesystem::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_SUITE("train") {

TEST_CASE("configuration validation names the field") {
  RunConfig c = Tiny(Strategy::kMtl);
  c.validate();
  c.alpha = 1.5;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("alpha"), Error);
  c = Tiny(Strategy::kMtl);
  c.patience_iterations = 7;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("patience"), Error);
  c = Tiny(Strategy::kSvsOnly);
  c.loss = LossVariant::kMaximumLikelihood;
  CHECK_THROWS_AS(c.validate(), Error);
  c = Tiny(Strategy::kMtl);
  c.batch_size = 0;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("batch_size"), Error);
}

TEST_CASE("configuration json round trip") {
  RunConfig c = Tiny(Strategy::kReplacement);
  c.alpha = 0.75;
  c.train_corpus = "x";
  const RunConfig back = run_config_from_json(to_json(c));
  CHECK(back.mode == Strategy::kReplacement);
  CHECK(back.alpha == 0.75);
  CHECK(back.train_corpus == "x");
  CHECK(back.network.base_channels == 4);
  CHECK(run_config_from_json(nlohmann::json::object()).mode == Strategy::kMtl);
  CHECK_THROWS_AS(run_config_from_json({{"mode", "both"}}), Error);
  CHECK_THROWS_AS(run_config_from_json({{"alpha", "high"}}), Error);
}

TEST_CASE("log rows") {
  std::ostringstream out;
  write_log_header(out);
  LogRow r;
  r.iteration = 10;
  r.mse = 0.5;
  r.ce = 0.25;
  r.mtl = 0.475;
  r.test_mse = 0.125;
  write_log_row(out, r);
  CHECK(out.str() == "iteration,mse,ce,mtl,au_roc,test_mse\n10,0.5,0.25,0.475,,0.125\n");
}

TEST_CASE("training writes logs and checkpoints deterministically") {
  TempDir a("train_a"), b("train_b");
  RunConfig c = Tiny(Strategy::kMtl);
  c.checkpoint_dir = a.path().string();
  const TrainResult ra = train(c, TinyCorpus(), TinyCorpus());
  c.checkpoint_dir = b.path().string();
  const TrainResult rb = train(c, TinyCorpus(), TinyCorpus());
  CHECK(ra.iterations == 10);
  CHECK(ra.log.size() == 2);
  CHECK_FALSE(ra.diverged);
  REQUIRE(ra.log[1].test_mse.has_value());
  REQUIRE(ra.log[1].au_roc.has_value());
  for (const char *f : {kLogFile, kBestMseCheckpoint, kBestAurocCheckpoint, kLastCheckpoint}) {
    REQUIRE(std::filesystem::exists(a.path() / f));
    CHECK_MESSAGE(Slurp(a.path() / f) == Slurp(b.path() / f), f);
  }
  const Checkpoint last = load_checkpoint(a.path() / kLastCheckpoint);
  CHECK(last.iteration == 10);
}

TEST_CASE("separation-only training lowers the training loss") {
  RunConfig c = Tiny(Strategy::kSvsOnly);
  c.max_iterations = 40;
  c.eval_interval = 20;
  c.learning_rate = 2e-3;
  const TrainResult r = train(c, TinyCorpus(), TinyCorpus());
  REQUIRE(r.log.size() == 2);
  CHECK(r.log[1].mse < r.log[0].mse);
  CHECK(r.log[0].ce == 0.0);
}

TEST_CASE("replacement mode counts eligible excerpts") {
  RunConfig c = Tiny(Strategy::kReplacement);
  c.max_iterations = 5;
  const TrainResult r = train(c, TinyCorpus(), TinyCorpus());
  CHECK(r.iterations == 5);
  CHECK(r.sampler.replaced <= r.sampler.eligible);
}

TEST_CASE("likelihood loss trains log sigma") {
  RunConfig c = Tiny(Strategy::kMtl);
  c.loss = LossVariant::kMaximumLikelihood;
  c.max_iterations = 5;
  const TrainResult r = train(c, TinyCorpus(), TinyCorpus());
  CHECK(r.final_params.log_sigma != 0.0);
}

}  // TEST_SUITE
