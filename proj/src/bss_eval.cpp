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

#include "svsd/bss_eval.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <random>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <fftw3.h>

#include "svsd/error.hpp"

namespace svsd {
namespace {

using Complex = std::complex<double>;
using Spectrum = std::vector<Complex>;

double Energy(const std::vector<double> &x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

double RatioDb(double num, double den) {
  const double tiny = std::numeric_limits<double>::min();
  return 10.0 * std::log10(std::max(num, tiny) / std::max(den, tiny));
}

// Real FFTs through FFTW. Plans are created once per size; the planner is
// not thread-safe, execution with the new-array interface is.
struct FftPlans {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
};

FftPlans PlansFor(std::size_t size) {
  static std::mutex mutex;
  static std::map<std::size_t, FftPlans> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(size);
  if (it != cache.end()) return it->second;
  const int n = static_cast<int>(size);
  double *real = fftw_alloc_real(size);
  fftw_complex *spec = fftw_alloc_complex(size / 2 + 1);
  FftPlans plans;
  plans.forward = fftw_plan_dft_r2c_1d(n, real, spec, FFTW_ESTIMATE);
  plans.inverse = fftw_plan_dft_c2r_1d(n, spec, real, FFTW_ESTIMATE);
  fftw_free(real);
  fftw_free(spec);
  Require(plans.forward && plans.inverse, ErrorCode::kNumeric, "bss_eval: FFT planning failed");
  cache.emplace(size, plans);
  return plans;
}

struct FftwDeleter {
  void operator()(void *p) const { fftw_free(p); }
};

class Correlator {
 public:
  Correlator(std::size_t n, int filter_length) {
    size_ = 1;
    while (size_ < n + static_cast<std::size_t>(filter_length)) size_ <<= 1;
    plans_ = PlansFor(size_);
    real_.reset(fftw_alloc_real(size_));
    spec_.reset(fftw_alloc_complex(size_ / 2 + 1));
    Require(real_ && spec_, ErrorCode::kNumeric, "bss_eval: FFT buffer allocation failed");
  }

  std::size_t padded() const { return size_; }

  Spectrum forward(const std::vector<double> &x) {
    std::fill(real_.get(), real_.get() + size_, 0.0);
    std::copy(x.begin(), x.end(), real_.get());
    fftw_execute_dft_r2c(plans_.forward, real_.get(), spec_.get());
    Spectrum out(size_ / 2 + 1);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = {spec_.get()[i][0], spec_.get()[i][1]};
    return out;
  }

  std::vector<double> inverse(const Spectrum &s) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      spec_.get()[i][0] = s[i].real();
      spec_.get()[i][1] = s[i].imag();
    }
    fftw_execute_dft_c2r(plans_.inverse, spec_.get(), real_.get());
    const double scale = 1.0 / static_cast<double>(size_);
    std::vector<double> out(size_);
    for (std::size_t i = 0; i < size_; ++i) out[i] = real_.get()[i] * scale;
    return out;
  }

  // c(d) = sum_t a(t) b(t + d) for circular lag index d.
  std::vector<double> correlate(const Spectrum &a, const Spectrum &b) {
    Spectrum p(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) p[i] = std::conj(a[i]) * b[i];
    return inverse(p);
  }

  double lag(const std::vector<double> &c, long d) const {
    return c[static_cast<std::size_t>(d >= 0 ? d : static_cast<long>(size_) + d)];
  }

 private:
  std::size_t size_;
  FftPlans plans_;
  std::unique_ptr<double, FftwDeleter> real_;
  std::unique_ptr<fftw_complex, FftwDeleter> spec_;
};

// Cholesky factor of the normal equations; a singular Gram matrix gets a
// ridge of 1e-10 relative to its mean diagonal.
class SpdSolver {
 public:
  explicit SpdSolver(const Eigen::MatrixXd &g) : llt_(g) {
    if (llt_.info() != Eigen::Success || !llt_.matrixLLT().allFinite()) {
      ridge_ = true;
      Eigen::MatrixXd r = g;
      r.diagonal().array() += 1e-10 * std::max(1.0, g.diagonal().mean());
      llt_.compute(r);
    }
  }
  Eigen::VectorXd solve(const Eigen::VectorXd &d) const { return llt_.solve(d); }
  bool ridge() const { return ridge_; }

 private:
  Eigen::LLT<Eigen::MatrixXd> llt_;
  bool ridge_ = false;
};

}  // namespace

std::vector<ExcerptSpan> segment(double length_s, double window_s, double hop_s) {
  Require(window_s > 0 && hop_s > 0, ErrorCode::kInvalidArgument,
          "segment: window and hop must be positive");
  std::vector<ExcerptSpan> out;
  const double tol = 1e-9;
  for (long i = 0;; ++i) {
    const double start = static_cast<double>(i) * hop_s;
    if (start + window_s > length_s + tol) break;
    out.push_back({start, start + window_s});
  }
  return out;
}

namespace {

std::vector<Decomposition> DecomposeAll(const std::vector<std::vector<double>> &refs,
                                        const std::vector<std::vector<double>> &ests,
                                        int filter_length) {
  const std::size_t k_count = refs.size();
  Require(k_count >= 1 && ests.size() == k_count, ErrorCode::kShape,
          "bss_eval: need matching reference and estimate lists");
  const std::size_t n = refs[0].size();
  for (std::size_t k = 0; k < k_count; ++k)
    Require(refs[k].size() == n && ests[k].size() == n, ErrorCode::kShape,
            "bss_eval: all signals must have the same length");
  Require(filter_length >= 1, ErrorCode::kInvalidArgument,
          "bss_eval: filter length must be positive");
  const long L = filter_length;
  const std::size_t out_len = n + static_cast<std::size_t>(L) - 1;

  Correlator corr(n, filter_length);
  std::vector<Spectrum> rs(k_count);
  for (std::size_t k = 0; k < k_count; ++k) rs[k] = corr.forward(refs[k]);

  // Gram matrix of all shifted references, blocks (k, l) of L x L.
  const Eigen::Index dim = static_cast<Eigen::Index>(k_count) * L;
  Eigen::MatrixXd gram(dim, dim);
  for (std::size_t k = 0; k < k_count; ++k) {
    for (std::size_t l = k; l < k_count; ++l) {
      const auto c = corr.correlate(rs[k], rs[l]);
      for (long a = 0; a < L; ++a) {
        for (long b = 0; b < L; ++b) {
          const double v = corr.lag(c, a - b);
          gram(static_cast<Eigen::Index>(k) * L + a, static_cast<Eigen::Index>(l) * L + b) = v;
          gram(static_cast<Eigen::Index>(l) * L + b, static_cast<Eigen::Index>(k) * L + a) = v;
        }
      }
    }
  }

  const SpdSolver all_solver(gram);
  std::vector<SpdSolver> own_solvers;
  for (std::size_t k = 0; k < k_count; ++k) {
    const Eigen::Index kk = static_cast<Eigen::Index>(k) * L;
    own_solvers.emplace_back(gram.block(kk, kk, L, L));
  }

  std::vector<Decomposition> out(k_count);
  for (std::size_t j = 0; j < k_count; ++j) {
    const Spectrum es = corr.forward(ests[j]);
    Eigen::VectorXd d(dim);
    for (std::size_t k = 0; k < k_count; ++k) {
      const auto c = corr.correlate(rs[k], es);
      for (long a = 0; a < L; ++a) d(static_cast<Eigen::Index>(k) * L + a) = corr.lag(c, a);
    }
    Decomposition &dec = out[j];
    const Eigen::Index jj = static_cast<Eigen::Index>(j) * L;
    const Eigen::VectorXd h_target = own_solvers[j].solve(d.segment(jj, L));
    const Eigen::VectorXd h_all = all_solver.solve(d);
    dec.ridge_used = own_solvers[j].ridge() || all_solver.ridge();

    auto synthesize = [&](const std::vector<std::pair<std::size_t, Eigen::VectorXd>> &parts) {
      Spectrum acc(rs[0].size(), Complex(0.0, 0.0));
      for (const auto &[k, h] : parts) {
        std::vector<double> taps(h.data(), h.data() + h.size());
        const Spectrum hs = corr.forward(taps);
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += hs[i] * rs[k][i];
      }
      std::vector<double> y = corr.inverse(acc);
      y.resize(out_len);
      return y;
    };

    dec.target = synthesize({{j, h_target}});
    std::vector<std::pair<std::size_t, Eigen::VectorXd>> parts;
    for (std::size_t k = 0; k < k_count; ++k)
      parts.emplace_back(k, h_all.segment(static_cast<Eigen::Index>(k) * L, L));
    const std::vector<double> all = synthesize(parts);
    dec.interference.resize(out_len);
    dec.artifacts.resize(out_len);
    for (std::size_t t = 0; t < out_len; ++t) {
      const double e = t < n ? ests[j][t] : 0.0;
      dec.interference[t] = all[t] - dec.target[t];
      dec.artifacts[t] = e - all[t];
    }
  }
  return out;
}

}  // namespace

Decomposition decompose(const std::vector<std::vector<double>> &references,
                        const std::vector<double> &estimate, std::size_t j,
                        int filter_length) {
  Require(j < references.size(), ErrorCode::kInvalidArgument,
          "decompose: source index out of range");
  std::vector<std::vector<double>> ests(references.size(),
                                        std::vector<double>(estimate.size(), 0.0));
  ests[j] = estimate;
  return DecomposeAll(references, ests, filter_length)[j];
}

SourceMetrics metrics_from(const Decomposition &d) {
  std::vector<double> noise(d.target.size());
  std::vector<double> signal(d.target.size());
  for (std::size_t t = 0; t < noise.size(); ++t) {
    noise[t] = d.interference[t] + d.artifacts[t];
    signal[t] = d.target[t] + d.interference[t];
  }
  const double target = Energy(d.target);
  SourceMetrics m;
  m.sdr = RatioDb(target, Energy(noise));
  m.sir = RatioDb(target, Energy(d.interference));
  m.sar = RatioDb(Energy(signal), Energy(d.artifacts));
  return m;
}

std::vector<SourceMetrics> bss_metrics(const std::vector<std::vector<double>> &references,
                                       const std::vector<std::vector<double>> &estimates,
                                       int filter_length, int *ridge_events) {
  const auto decs = DecomposeAll(references, estimates, filter_length);
  std::vector<SourceMetrics> out;
  for (const auto &d : decs) {
    if (d.ridge_used && ridge_events) ++*ridge_events;
    out.push_back(metrics_from(d));
  }
  return out;
}

SourceMetrics BssResult::mean(std::size_t source) const {
  SourceMetrics m{0.0, 0.0, 0.0};
  int count = 0;
  for (const auto &e : excerpts) {
    if (e.excluded) continue;
    m.sdr += e.sources.at(source).sdr;
    m.sir += e.sources.at(source).sir;
    m.sar += e.sources.at(source).sar;
    ++count;
  }
  if (count == 0) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {nan, nan, nan};
  }
  m.sdr /= count;
  m.sir /= count;
  m.sar /= count;
  return m;
}

namespace {

std::pair<std::size_t, std::size_t> SampleRange(const ExcerptSpan &span, int rate,
                                                std::size_t length) {
  const auto b = static_cast<std::size_t>(std::llround(span.start_s * rate));
  const auto e = static_cast<std::size_t>(std::llround(span.end_s * rate));
  return {std::min(b, length), std::min(e, length)};
}

}  // namespace

BssResult bss_eval(const std::vector<AudioClip> &references,
                   const std::vector<AudioClip> &estimates, const BssConfig &config) {
  Require(references.size() >= 2 && estimates.size() == references.size(),
          ErrorCode::kShape, "bss_eval: need K >= 2 references and as many estimates");
  const int rate = references[0].sample_rate;
  const std::size_t n = references[0].size();
  for (std::size_t k = 0; k < references.size(); ++k) {
    Require(references[k].size() == n && estimates[k].size() == n, ErrorCode::kShape,
            "bss_eval: references and estimates must have equal lengths");
    Require(references[k].sample_rate == rate && estimates[k].sample_rate == rate,
            ErrorCode::kShape, "bss_eval: sample rates differ");
  }

  BssResult result;
  result.sources = references.size();
  for (const ExcerptSpan &span :
       segment(static_cast<double>(n) / rate, config.window_s, config.hop_s)) {
    const auto [b, e] = SampleRange(span, rate, n);
    ExcerptResult ex;
    ex.span = span;
    std::vector<std::vector<double>> refs, ests;
    for (std::size_t k = 0; k < references.size(); ++k) {
      refs.emplace_back(references[k].samples.begin() + b, references[k].samples.begin() + e);
      ests.emplace_back(estimates[k].samples.begin() + b, estimates[k].samples.begin() + e);
      double peak = 0.0;
      for (double v : refs.back()) peak = std::max(peak, std::abs(v));
      if (peak <= config.silence_epsilon) ex.excluded = true;
    }
    if (ex.excluded) {
      ++result.excluded_count;
    } else {
      ex.sources = bss_metrics(refs, ests, config.filter_length, &result.ridge_events);
      ++result.included_count;
    }
    result.excerpts.push_back(std::move(ex));
  }
  return result;
}

std::optional<double> nonvocal_rms(const AudioClip &estimate_vocals,
                                   const BssResult &result) {
  double sum = 0.0;
  int count = 0;
  const int rate = estimate_vocals.sample_rate;
  for (const auto &ex : result.excerpts) {
    if (!ex.excluded) continue;
    const auto [b, e] = SampleRange(ex.span, rate, estimate_vocals.size());
    double energy = 0.0;
    for (std::size_t t = b; t < e; ++t) energy += estimate_vocals.samples[t] * estimate_vocals.samples[t];
    sum += e > b ? std::sqrt(energy / static_cast<double>(e - b)) : 0.0;
    ++count;
  }
  if (count == 0) return std::nullopt;
  return sum / count;
}

void write_excerpt_csv_header(std::ostream &out) {
  out << "track,source,start_s,sdr,sir,sar,excluded\n";
}

void write_excerpt_csv(std::ostream &out, const std::string &track,
                       const std::vector<std::string> &source_names,
                       const BssResult &result) {
  for (const auto &ex : result.excerpts) {
    for (std::size_t k = 0; k < result.sources; ++k) {
      const std::string name = k < source_names.size() ? source_names[k] : std::to_string(k);
      out << track << ',' << name << ',' << ex.span.start_s << ',';
      if (ex.excluded) {
        out << ",,,1\n";
      } else {
        const auto &m = ex.sources[k];
        out << m.sdr << ',' << m.sir << ',' << m.sar << ",0\n";
      }
    }
  }
}

std::pair<std::size_t, std::size_t> excluded_only_region(const BssResult &result,
                                                         int sample_rate,
                                                         std::size_t length) {
  std::vector<std::uint8_t> state(length, 0);  // bit 0: excluded, bit 1: included
  for (const auto &ex : result.excerpts) {
    const auto [b, e] = SampleRange(ex.span, sample_rate, length);
    const std::uint8_t bit = ex.excluded ? 1 : 2;
    for (std::size_t t = b; t < e; ++t) state[t] |= bit;
  }
  std::pair<std::size_t, std::size_t> best{0, 0};
  std::size_t t = 0;
  while (t < length) {
    if (state[t] != 1) {
      ++t;
      continue;
    }
    std::size_t e = t;
    while (e < length && state[e] == 1) ++e;
    if (e - t > best.second - best.first) best = {t, e};
    t = e;
  }
  return best;
}

FlawReport flaw_demo(const std::string &track, const std::vector<AudioClip> &references,
                     const std::vector<AudioClip> &estimates,
                     const std::vector<double> &amplitudes, std::uint64_t seed,
                     const BssConfig &config) {
  Require(references.size() == 2 && estimates.size() == 2, ErrorCode::kShape,
          "flaw_demo: expects (vocals, accompaniment) references and estimates");
  FlawReport report;
  report.track = track;
  const BssResult base = bss_eval(references, estimates, config);
  report.excluded_count = base.excluded_count;
  report.included_count = base.included_count;
  Require(base.excluded_count > 0, ErrorCode::kState,
          "flaw_demo: track '" + track + "' has no excerpt with a silent reference");
  const int rate = references[0].sample_rate;
  const std::size_t n = references[0].size();
  const auto [b, e] = excluded_only_region(base, rate, n);
  Require(e > b, ErrorCode::kState,
          "flaw_demo: every excluded excerpt overlaps an included one");
  report.region_start_s = static_cast<double>(b) / rate;
  report.region_end_s = static_cast<double>(e) / rate;

  auto summarize = [&](const BssResult &r, const AudioClip &vocals, double amplitude) {
    FlawStep s;
    s.amplitude = amplitude;
    s.mean_sdr_vocals = r.mean(0).sdr;
    s.mean_sdr_accompaniment = r.mean(1).sdr;
    s.nonvocal_rms = nonvocal_rms(vocals, r).value_or(0.0);
    return s;
  };
  report.baseline = summarize(base, estimates[0], 0.0);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> noise(e - b);
  for (double &v : noise) v = normal(rng);
  for (double a : amplitudes) {
    std::vector<AudioClip> changed = estimates;
    for (std::size_t t = b; t < e; ++t) changed[0].samples[t] += a * noise[t - b];
    const BssResult r = bss_eval(references, changed, config);
    FlawStep s = summarize(r, changed[0], a);
    s.delta_sdr_vocals = s.mean_sdr_vocals - report.baseline.mean_sdr_vocals;
    report.steps.push_back(s);
  }
  return report;
}

}  // namespace svsd
