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

// Acceptance checks. `acceptance --criterion N` runs one, no argument runs
// all; one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <limits>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "svsd/bss_eval.hpp"
#include "svsd/data.hpp"
#include "svsd/dsp.hpp"
#include "svsd/loss.hpp"
#include "svsd/model.hpp"
#include "svsd/stats.hpp"
#include "svsd/synth.hpp"
#include "svsd/train.hpp"

namespace fs = std::filesystem;
using namespace svsd;
using namespace svsd::testing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

std::string Fmt(const char *format, ...) __attribute__((format(printf, 1, 2)));
std::string Fmt(const char *format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

std::vector<double> Uniform(std::mt19937_64 &rng, std::size_t n, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double &x : v) x = u(rng);
  return v;
}

fs::path ScratchDir(const std::string &tag) {
  std::random_device rd;
  fs::path p = fs::temp_directory_path() / ("svsd_accept_" + tag + "_" + std::to_string(rd()));
  fs::create_directories(p);
  return p;
}

// ---- 1 -----------------------------------------------------------------------

Outcome ShapeChainCheck() {
  const auto start = Clock::now();
  const NetworkConfig cfg;
  const auto params = build<float>(cfg, 0);
  const ShapeChain s = shape_chain(cfg);
  bool ok = s.input == Shape3{350, 222, 1} && derive_padded_bins(cfg) == 350;
  ok = ok && s.down.size() == 5 && s.down.back() == Shape3{18, 10, 256};
  ok = ok && s.expanded == Shape3{18, 10, 256};
  ok = ok && !s.up.empty() && s.up.back() == Shape3{258, 130, 16};
  ok = ok && s.frame_offset == 46 && s.output_frames == 130;
  // A forward pass on a padded input realises the same chain.
  FrameMatrix x = FrameMatrix::Zero(257, 222);
  const ModelOutput o = forward(params, x);
  ok = ok && o.masks.shape() == Shape3{257, 130, 2} && o.output_frame_offset == 46;
  const double t = Seconds(start);
  return {ok && t < 1.0,
          Fmt("bottleneck %dx%dx%d, last map %dx%dx%d, input %dx%d, offset %d, %.2f s",
              s.down.back().f, s.down.back().t, s.down.back().c, s.up.back().f,
              s.up.back().t, s.up.back().c, derive_padded_bins(cfg), cfg.input_frames,
              s.frame_offset, t)};
}

// ---- 2 -----------------------------------------------------------------------

Outcome Gradients() {
  const auto start = Clock::now();
  NetworkConfig cfg;
  cfg.base_channels = 4;
  cfg.num_sources = 1;
  auto p = build<double>(cfg, 21);
  std::mt19937_64 rng(22);
  std::normal_distribution<double> jitter(0.0, 0.05);
  for (auto &l : p.layers)
    for (auto &b : l.bias) b = jitter(rng);
  FrameMatrix x(257, 222);
  std::uniform_real_distribution<float> u(0.0f, 2.0f);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = u(rng);
  Tensor3<double> wm(257, 130, 1);
  for (auto &v : wm.storage()) v = std::uniform_real_distribution<double>(-1, 1)(rng);
  const auto wp = Uniform(rng, 130);
  auto loss = [&] {
    const ModelOutput o = forward(p, x);
    double s = 0.0;
    for (std::size_t i = 0; i < wm.size(); ++i) s += wm.storage()[i] * o.masks.storage()[i];
    for (std::size_t t = 0; t < wp.size(); ++t) s += wp[t] * o.vocal_probs[t];
    return s;
  };
  ForwardRecord<double> rec(p);
  forward(p, x, &rec);
  ParamGrads grads;
  backward(p, rec, wm, wp, grads);

  // Kernel entries come from the top quartile of |gradient|, tiny blocks are
  // sampled whole. Steps that cross a kink are shrunk, then redrawn.
  const double base = loss();
  double worst = 0.0;
  std::string worst_where;
  int checked = 0, skipped = 0, tiny = 0, blocks = 0, unchecked = 0, at_default = 0;
  auto check = [&](std::vector<double> &values, const std::vector<double> &analytic,
                   const std::string &where) {
    ++blocks;
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return std::abs(analytic[a]) > std::abs(analytic[b]);
    });
    const std::size_t pool = order.size() <= 64 ? order.size() : order.size() / 4;
    std::uniform_int_distribution<std::size_t> pick(0, pool - 1);
    int done = 0;
    for (int attempt = 0; attempt < 20 && done < 3; ++attempt) {
      const std::size_t i = order[pick(rng)];
      const Derivative d = KinkAwareDerivative(loss, values[i], base);
      if (!d.kink_free) {
        ++skipped;
        continue;
      }
      const double scale = std::max({std::abs(d.value), std::abs(analytic[i]), 1e-12});
      if (scale < 100 * d.resolution) {
        ++tiny;
        continue;
      }
      const double rel = std::abs(d.value - analytic[i]) / scale;
      if (rel > worst) {
        worst = rel;
        worst_where = where;
      }
      if (d.step == 1e-4) ++at_default;
      ++done;
    }
    checked += done;
    if (done == 0) ++unchecked;
  };
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    check(p.layers[l].kernel, grads[l].kernel, p.layers[l].name + ".kernel");
    check(p.layers[l].bias, grads[l].bias, p.layers[l].name + ".bias");
  }
  const double t = Seconds(start);
  return {worst < 1e-4 && unchecked == 0 && t < 120.0,
          Fmt("%d blocks (%d without a usable sample), %d entries (%d at h=1e-4), %d redrawn at kinks, "
              "%d below rounding, "
              "max relative error %.2e (%s), %.1f s",
              blocks, unchecked, checked, at_default, skipped, tiny, worst, worst_where.c_str(), t)};
}

// ---- 3 -----------------------------------------------------------------------

Outcome LossIdentity() {
  const auto start = Clock::now();
  const double n = 4, m = 6, f = 257;
  const double s2 = ml_equivalent_sigma_sq(n, m, f);
  const double log_sigma = 0.5 * std::log(s2);
  const double alpha = ml_induced_alpha(s2, n, m);
  std::mt19937_64 rng(3);
  double worst = 0.0;
  bool affine_exact = true;
  for (int i = 0; i < 1000; ++i) {
    const auto v = Uniform(rng, 2, 0.0, 3.0);
    // Naive objective written out with the induced weights.
    const double naive = alpha * v[0] + (1.0 - alpha) * v[1];
    const double lhs = ml_loss(v[0], v[1], log_sigma, n, m, f).value;
    const double rhs = naive + (n / (n + m)) * log_sigma;
    worst = std::max(worst, std::abs(lhs - rhs) / std::max(std::abs(lhs), 1e-300));
    affine_exact = affine_exact && mtl_loss(v[0], v[1], 0.9) == 0.9 * v[0] + (1.0 - 0.9) * v[1];
  }
  const bool sigma_ok = std::abs(s2 - f * n / (2 * f * n + 2 * m * f - m)) <= 1e-15 * s2;
  const double t = Seconds(start);
  return {worst <= 1e-10 && affine_exact && sigma_ok && t < 1.0,
          Fmt("sigma^2 = %.12f, max relative gap %.2e over 1000 pairs, alpha=0.9 exact: %s, "
              "%.3f s",
              s2, worst, affine_exact ? "yes" : "no", t)};
}

// ---- 4 -----------------------------------------------------------------------

Outcome ReplacementRate() {
  const auto start = Clock::now();
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  SvdTrack nv;
  nv.id = "nonvocal";
  nv.mixture.resize(257, 300);
  for (Eigen::Index i = 0; i < nv.mixture.size(); ++i) nv.mixture(i) = u(rng);
  nv.labels.assign(300, 0);
  SvsTrack st;
  st.id = "silent";
  st.mixture = st.vocals = st.accompaniment = nv.mixture.leftCols(222);
  st.vocal_windows.assign(258, 0);
  const SvdDataset svd({nv}, WindowGeometry{});
  const SvsDataset svs({st}, WindowGeometry{});
  const SvsSample base = svs.excerpt(0, 0);

  bool ok = true;
  std::string detail;
  for (auto [n, m] : std::vector<std::pair<double, double>>{{50, 60}, {20, 80}, {90, 10}}) {
    Rng r(static_cast<std::uint64_t>(1000 * n + m));
    SamplerStats stats;
    while (stats.eligible < 20000) {
      SvsSample s = base;
      replacement_sampler(r, s, svs.vocals_silent(0, 0), &svd, n, m, stats);
    }
    const double rate = static_cast<double>(stats.replaced) / static_cast<double>(stats.eligible);
    const double expect = n / (n + m);
    ok = ok && std::abs(rate - expect) <= 0.02;
    detail += Fmt("(%g,%g): %.4f vs %.4f; ", n, m, rate, expect);
  }
  const double t = Seconds(start);
  return {ok && t < 10.0, detail + Fmt("%.2f s", t)};
}

// ---- 5 -----------------------------------------------------------------------

Outcome FlawProperty() {
  const auto start = Clock::now();
  const MultiTrackSong song = flaw_demo_track(5);
  const std::vector<AudioClip> refs = {song.vocals, song.accompaniment};
  const std::vector<AudioClip> est = leaky_estimates(song, 0.1);
  const FlawReport r = flaw_demo(song.id, refs, est, {0.01, 0.03, 0.1}, 5);
  bool unchanged = r.steps.size() == 3;
  bool increasing = true;
  double prev = r.baseline.nonvocal_rms;
  std::string rms = Fmt("%.4f", prev);
  for (const auto &s : r.steps) {
    unchanged = unchanged && s.delta_sdr_vocals == 0.0 &&
                s.mean_sdr_vocals == r.baseline.mean_sdr_vocals;
    increasing = increasing && s.nonvocal_rms > prev;
    prev = s.nonvocal_rms;
    rms += Fmt(" -> %.4f", s.nonvocal_rms);
  }
  const double t = Seconds(start);
  return {unchanged && increasing && r.excluded_count >= 1 && t < 30.0,
          Fmt("%d excluded / %d included excerpts, noise in %.0f-%.0f s, delta SDR %s, "
              "non-vocal RMS %s, %.1f s",
              r.excluded_count, r.included_count, r.region_start_s, r.region_end_s,
              unchanged ? "0 exactly" : "non-zero", rms.c_str(), t)};
}

// ---- 6 -----------------------------------------------------------------------

Outcome BssOracleCheck() {
  const auto start = Clock::now();
  std::mt19937_64 rng(6);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int k = 2 + trial % 2;
    const std::size_t n = 120 + 13 * static_cast<std::size_t>(trial);
    const int L = 4 + trial % 13;
    std::vector<std::vector<double>> refs, ests;
    for (int j = 0; j < k; ++j) refs.push_back(Uniform(rng, n));
    for (int j = 0; j < k; ++j) {
      std::vector<double> e = Uniform(rng, n, -0.2, 0.2);
      for (std::size_t t = 0; t < n; ++t) {
        e[t] += refs[j][t] + (t > 1 ? 0.4 * refs[j][t - 2] : 0.0);
        for (int o = 0; o < k; ++o)
          if (o != j) e[t] += 0.25 * refs[o][t];
      }
      ests.push_back(e);
    }
    const auto got = bss_metrics(refs, ests, L);
    for (int j = 0; j < k; ++j) {
      const OracleMetrics o = BssOracle(refs, ests[j], static_cast<std::size_t>(j), L);
      worst = std::max({worst, std::abs(got[j].sdr - o.sdr), std::abs(got[j].sir - o.sir),
                        std::abs(got[j].sar - o.sar)});
    }
  }
  std::vector<std::vector<double>> refs = {Uniform(rng, 2000), Uniform(rng, 2000)};
  const auto perfect = bss_metrics(refs, refs, 64);
  const double perfect_sdr = std::min(perfect[0].sdr, perfect[1].sdr);
  std::vector<std::vector<double>> est = refs;
  for (std::size_t t = 0; t < 2000; ++t) {
    est[0][t] += 0.3 * refs[1][t] + 0.05 * std::sin(0.1 * t);
    est[1][t] += 0.2 * refs[0][t] + 0.03 * std::cos(0.07 * t);
  }
  const auto base = bss_metrics(refs, est, 64);
  double drift = 0.0;
  for (double c : {1e-3, 0.5, 7.0}) {
    auto scaled = est;
    for (auto &e : scaled)
      for (double &v : e) v *= c;
    const auto m = bss_metrics(refs, scaled, 64);
    for (int j = 0; j < 2; ++j)
      drift = std::max({drift, std::abs(m[j].sdr - base[j].sdr), std::abs(m[j].sir - base[j].sir),
                        std::abs(m[j].sar - base[j].sar)});
  }
  const double t = Seconds(start);
  return {worst < 0.01 && perfect_sdr >= 100.0 && drift <= 0.001,
          Fmt("max oracle deviation %.2e dB, perfect SDR %.1f dB, scale drift %.2e dB, %.2f s",
              worst, perfect_sdr, drift, t)};
}

// ---- 7 -----------------------------------------------------------------------

Outcome StatsOracles() {
  const auto start = Clock::now();
  std::mt19937_64 rng(7);
  std::normal_distribution<double> z(0.0, 1.0);
  double wil_gap = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    auto a = Uniform(rng, 8), b = Uniform(rng, 8);
    if (trial % 4 == 0)
      for (int i = 0; i < 4; ++i) b[i] = a[i] + (i % 2 ? 0.25 : -0.25);
    std::vector<double> d(8);
    for (int i = 0; i < 8; ++i) d[i] = a[i] - b[i];
    wil_gap = std::max(wil_gap, std::abs(wilcoxon_signed_rank(a, b).p - WilcoxonEnumerationP(d)));
  }

  int agree = 0;
  bool identical_p1 = true;
  for (int inst = 0; inst < 10; ++inst) {
    std::vector<double> a, b;
    std::vector<std::uint8_t> y;
    for (int i = 0; i < 120; ++i) {
      y.push_back(i % 2);
      a.push_back((i % 2) + 0.6 * z(rng));
      b.push_back((i % 2) + 3.0 * z(rng));
    }
    if (inst % 2 == 0) {
      std::vector<std::size_t> pos, neg;
      for (std::size_t i = 0; i < y.size(); ++i) (y[i] ? pos : neg).push_back(i);
      auto sp = pos, sn = neg;
      std::shuffle(sp.begin(), sp.end(), rng);
      std::shuffle(sn.begin(), sn.end(), rng);
      for (std::size_t i = 0; i < pos.size(); ++i) b[pos[i]] = a[sp[i]];
      for (std::size_t i = 0; i < neg.size(); ++i) b[neg[i]] = a[sn[i]];
    }
    identical_p1 = identical_p1 && delong_test(a, a, y).p == 1.0;
    const bool reject_delong = delong_test(a, b, y).p < 0.05;
    const bool reject_perm = PermutationAucP(a, b, y, 2000, 700 + inst) < 0.05;
    agree += reject_delong == reject_perm;
  }

  double auc_gap = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> s;
    std::vector<std::uint8_t> y;
    for (int i = 0; i < 99; ++i) {
      y.push_back(i % 3 == 0);
      double v = y.back() + z(rng);
      if (trial % 2) v = std::round(v * 3.0) / 3.0;
      s.push_back(v);
    }
    auc_gap = std::max(auc_gap, std::abs(au_roc(s, y) - TrapezoidAuc(s, y)));
  }
  const double t = Seconds(start);
  return {wil_gap < 1e-12 && identical_p1 && agree == 10 && auc_gap <= 1e-12,
          Fmt("Wilcoxon gap %.1e, DeLong identical p=1: %s, accept/reject agreement %d/10, "
              "AU-ROC trapezoid gap %.1e, %.1f s",
              wil_gap, identical_p1 ? "yes" : "no", agree, auc_gap, t)};
}

// ---- 8 -----------------------------------------------------------------------

struct SmokeSettings {
  int seeds = 5;
  long iterations = 2000;
  int batch_size = 1;
  double learning_rate = 5e-4;
  int base_channels = 8;
};

SmokeSettings SmokeFromEnv() {
  SmokeSettings s;
  if (const char *v = std::getenv("SVSD_SMOKE_SEEDS")) s.seeds = std::atoi(v);
  if (const char *v = std::getenv("SVSD_SMOKE_ITERATIONS")) s.iterations = std::atol(v);
  if (const char *v = std::getenv("SVSD_SMOKE_BATCH")) s.batch_size = std::atoi(v);
  return s;
}

Outcome TrainingSmoke() {
  const auto start = Clock::now();
  const SmokeSettings st = SmokeFromEnv();
  SynthSpec spec;
  spec.multitrack_songs = 20;
  spec.test_multitrack_songs = 5;
  spec.labeled_songs = 20;
  spec.test_labeled_songs = 5;
  Rng rng(8);
  const Corpus corpus = generate_synthetic_corpus(rng, spec);

  int mtl_wins = 0;
  double auroc_sum = 0.0;
  std::string rows;
  for (int seed = 0; seed < st.seeds; ++seed) {
    double mse[2] = {0.0, 0.0};
    for (int mode = 0; mode < 2; ++mode) {
      RunConfig c;
      c.mode = mode == 0 ? Strategy::kMtl : Strategy::kSvsOnly;
      c.seed = static_cast<std::uint64_t>(seed);
      c.batch_size = st.batch_size;
      c.learning_rate = st.learning_rate;
      c.max_iterations = st.iterations;
      c.eval_interval = st.iterations;
      c.patience_iterations = st.iterations;
      c.network.base_channels = st.base_channels;
      const TrainResult r = train(c, corpus, corpus);
      if (r.diverged || r.log.empty() || !r.log.back().test_mse)
        return {false, Fmt("seed %d mode %s did not finish: %s", seed, to_string(c.mode).c_str(),
                           r.divergence_message.c_str())};
      mse[mode] = *r.log.back().test_mse;
      if (mode == 0) {
        const double a = r.log.back().au_roc.value_or(0.0);
        auroc_sum += a;
        rows += Fmt("seed %d: mtl %.5f (AU-ROC %.3f) vs svs_only ", seed, mse[0], a);
      } else {
        rows += Fmt("%.5f; ", mse[1]);
      }
      std::cerr << "  smoke seed " << seed << ' ' << to_string(c.mode) << " done at "
                << Seconds(start) << " s\n";
    }
    if (mse[0] <= mse[1]) ++mtl_wins;
  }
  const double mean_auroc = auroc_sum / st.seeds;
  const int needed = (3 * st.seeds + 4) / 5;
  const double t = Seconds(start);
  return {mtl_wins >= needed && mean_auroc > 0.8 && t < 1800.0,
          rows + Fmt("mtl <= svs_only in %d/%d seeds, mean AU-ROC %.3f, %ld iterations, "
                     "batch %d, %.0f s",
                     mtl_wins, st.seeds, mean_auroc, st.iterations, st.batch_size, t)};
}

// ---- 9 -----------------------------------------------------------------------

Outcome DspSuite() {
  const auto start = Clock::now();
  std::mt19937_64 rng(9);
  double round_trip = 0.0;
  for (std::size_t n : {1000u, 4096u, 22050u, 30001u}) {
    AudioClip c{Uniform(rng, n), kModelSampleRate};
    const AudioClip back = istft(stft(c));
    for (std::size_t i = 0; i < n; ++i)
      round_trip = std::max(round_trip, std::abs(back.samples[i] - c.samples[i]));
  }
  int monotone = 0;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    SpecMatrix mag(257, 20 + trial % 7), phase(257, 20 + trial % 7);
    for (Eigen::Index i = 0; i < mag.size(); ++i) {
      mag(i) = u(rng) * (trial % 3 + 1);
      phase(i) = (2 * u(rng) - 1) * M_PI;
    }
    std::vector<double> d;
    const Spectrogram g = griffin_lim(mag, phase, {}, 10, &d);
    d.push_back(consistency_distance(mag, g.phases));
    bool ok = true;
    for (std::size_t i = 1; i < d.size(); ++i) ok = ok && d[i] <= d[i - 1] * (1 + 1e-12);
    monotone += ok;
  }
  double norm_gap = 0.0;
  SpecMatrix r(257, 100);
  for (Eigen::Index i = 0; i < r.size(); ++i) r(i) = u(rng) * 100.0;
  const SpecMatrix back = denormalize(normalize(r));
  for (Eigen::Index i = 0; i < r.size(); ++i)
    norm_gap = std::max(norm_gap, std::abs(back(i) - r(i)) / std::max(r(i), 1.0));
  const double t = Seconds(start);
  return {round_trip < 1e-6 && monotone == 50 && norm_gap < 1e-9,
          Fmt("STFT round trip %.2e, Griffin-Lim monotone %d/50, normalize round trip %.2e, "
              "%.1f s",
              round_trip, monotone, norm_gap, t)};
}

// ---- 10 ----------------------------------------------------------------------

std::string Slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome Determinism() {
  const auto start = Clock::now();
  SynthSpec spec;
  spec.multitrack_songs = 3;
  spec.test_multitrack_songs = 1;
  spec.labeled_songs = 3;
  spec.test_labeled_songs = 1;
  spec.duration_seconds = 10.0;
  Rng rng(10);
  const Corpus corpus = generate_synthetic_corpus(rng, spec);
  const fs::path root = ScratchDir("determinism");
  RunConfig c;
  c.mode = Strategy::kMtl;
  c.seed = 99;
  c.batch_size = 2;
  c.max_iterations = 20;
  c.eval_interval = 10;
  c.patience_iterations = 100;
  c.network.base_channels = 8;
  for (const char *run : {"a", "b"}) {
    c.checkpoint_dir = (root / run).string();
    train(c, corpus, corpus);
  }
  bool same = true;
  std::string files;
  for (const char *f : {kLogFile, kBestMseCheckpoint, kBestAurocCheckpoint, kLastCheckpoint}) {
    const std::string a = Slurp(root / "a" / f), b = Slurp(root / "b" / f);
    same = same && !a.empty() && a == b;
    files += Fmt("%s %zu B; ", f, a.size());
  }
  fs::remove_all(root);
  const double t = Seconds(start);
  return {same, files + Fmt("identical: %s, %.1f s", same ? "yes" : "no", t)};
}

struct Criterion {
  int id;
  const char *name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char **argv) {
  const std::vector<Criterion> all = {
      {1, "shape chain", ShapeChainCheck},
      {2, "gradient correctness", Gradients},
      {3, "loss identity", LossIdentity},
      {4, "replacement-sampler rate", ReplacementRate},
      {5, "SDR flaw property", FlawProperty},
      {6, "BSS-eval oracle", BssOracleCheck},
      {7, "statistics oracles", StatsOracles},
      {8, "training smoke (MTL benefit direction)", TrainingSmoke},
      {9, "DSP suite", DspSuite},
      {10, "determinism", Determinism},
  };
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::cerr << "usage: acceptance [--criterion N]\n";
      return 64;
    }
  }
  int failures = 0, ran = 0;
  for (const auto &c : all) {
    if (only && c.id != only) continue;
    ++ran;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception &e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name
              << "): " << o.detail << std::endl;
    failures += !o.pass;
  }
  if (ran == 0) {
    std::cerr << "no criterion " << only << '\n';
    return 64;
  }
  return failures == 0 ? 0 : 1;
}
