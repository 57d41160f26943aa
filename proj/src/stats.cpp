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

#include "svsd/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "svsd/error.hpp"

namespace svsd {
namespace {

void CheckBinary(std::span<const double> scores, std::span<const std::uint8_t> labels,
                 std::size_t &positives, std::size_t &negatives) {
  Require(scores.size() == labels.size(), ErrorCode::kShape,
          "score and label counts differ (" + std::to_string(scores.size()) + " vs " +
              std::to_string(labels.size()) + ")");
  positives = 0;
  for (auto l : labels) positives += l ? 1 : 0;
  negatives = labels.size() - positives;
  Require(positives > 0 && negatives > 0, ErrorCode::kInvalidArgument,
          "AU-ROC needs both positive and negative labels");
  for (double s : scores)
    Require(std::isfinite(s), ErrorCode::kNumeric, "non-finite score");
}

}  // namespace

std::vector<double> midranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double au_roc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  std::size_t m = 0, n = 0;
  CheckBinary(scores, labels, m, n);
  const auto ranks = midranks(scores);
  double pos_sum = 0.0;
  for (std::size_t i = 0; i < ranks.size(); ++i)
    if (labels[i]) pos_sum += ranks[i];
  const double md = static_cast<double>(m), nd = static_cast<double>(n);
  return (pos_sum - md * (md + 1.0) / 2.0) / (md * nd);
}

double normal_two_sided_p(double z) {
  return std::min(1.0, std::erfc(std::abs(z) / std::sqrt(2.0)));
}

DelongResult delong_test(std::span<const double> scores_a, std::span<const double> scores_b,
                         std::span<const std::uint8_t> labels) {
  std::size_t m = 0, n = 0;
  CheckBinary(scores_a, labels, m, n);
  CheckBinary(scores_b, labels, m, n);

  // Structural components V10 (per positive) and V01 (per negative).
  auto components = [&](std::span<const double> s, std::vector<double> &v10,
                        std::vector<double> &v01) {
    std::vector<double> pos, neg;
    for (std::size_t i = 0; i < s.size(); ++i) (labels[i] ? pos : neg).push_back(s[i]);
    const auto r_all = midranks(s);
    const auto r_pos = midranks(pos);
    const auto r_neg = midranks(neg);
    v10.clear();
    v01.clear();
    std::size_t ip = 0, in = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (labels[i]) {
        v10.push_back((r_all[i] - r_pos[ip++]) / static_cast<double>(n));
      } else {
        v01.push_back(1.0 - (r_all[i] - r_neg[in++]) / static_cast<double>(m));
      }
    }
    double auc = 0.0;
    for (double v : v10) auc += v;
    return auc / static_cast<double>(m);
  };

  std::vector<double> a10, a01, b10, b01;
  DelongResult r;
  r.auc_a = components(scores_a, a10, a01);
  r.auc_b = components(scores_b, b10, b01);

  auto cov = [](const std::vector<double> &x, const std::vector<double> &y, double mx,
                double my) {
    if (x.size() < 2) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - mx) * (y[i] - my);
    return s / static_cast<double>(x.size() - 1);
  };
  const double md = static_cast<double>(m), nd = static_cast<double>(n);
  const double s10_aa = cov(a10, a10, r.auc_a, r.auc_a);
  const double s10_bb = cov(b10, b10, r.auc_b, r.auc_b);
  const double s10_ab = cov(a10, b10, r.auc_a, r.auc_b);
  const double s01_aa = cov(a01, a01, r.auc_a, r.auc_a);
  const double s01_bb = cov(b01, b01, r.auc_b, r.auc_b);
  const double s01_ab = cov(a01, b01, r.auc_a, r.auc_b);
  r.variance = (s10_aa + s10_bb - 2.0 * s10_ab) / md + (s01_aa + s01_bb - 2.0 * s01_ab) / nd;

  const double delta = r.auc_a - r.auc_b;
  const double scale = 1e-14 * std::max(1.0, s10_aa + s10_bb + s01_aa + s01_bb);
  if (r.variance <= scale) {
    Require(delta == 0.0, ErrorCode::kNumeric,
            "delong_test: degenerate (zero variance with AUC difference " +
                std::to_string(delta) + ")");
    r.variance = std::max(r.variance, 0.0);
    r.z = 0.0;
    r.p = 1.0;
    return r;
  }
  r.z = delta / std::sqrt(r.variance);
  r.p = normal_two_sided_p(r.z);
  return r;
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
  Require(a.size() == b.size(), ErrorCode::kShape, "wilcoxon: samples are not paired");
  std::vector<double> diff;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    Require(std::isfinite(d), ErrorCode::kNumeric, "wilcoxon: non-finite difference");
    if (d != 0.0) diff.push_back(d);
  }
  WilcoxonResult r;
  r.n = static_cast<int>(diff.size());
  if (r.n == 0) {
    r.exact = true;
    return r;
  }
  std::vector<double> mags(diff.size());
  for (std::size_t i = 0; i < diff.size(); ++i) mags[i] = std::abs(diff[i]);
  const auto ranks = midranks(mags);
  for (std::size_t i = 0; i < diff.size(); ++i)
    if (diff[i] > 0) r.statistic += ranks[i];

  const double n = r.n;
  if (r.n <= 25) {
    // Null distribution of the doubled statistic: every rank enters with
    // probability 1/2. Doubled midranks are integers.
    std::vector<int> doubled(diff.size());
    int total = 0;
    for (std::size_t i = 0; i < diff.size(); ++i) {
      doubled[i] = static_cast<int>(std::lround(2.0 * ranks[i]));
      total += doubled[i];
    }
    std::vector<double> count(static_cast<std::size_t>(total) + 1, 0.0);
    count[0] = 1.0;
    for (int d : doubled)
      for (int s = total; s >= d; --s) count[s] += count[s - d];
    const double all = std::ldexp(1.0, r.n);
    const int w = static_cast<int>(std::lround(2.0 * r.statistic));
    double lower = 0.0, upper = 0.0;
    for (int s = 0; s <= total; ++s) {
      if (s <= w) lower += count[s];
      if (s >= w) upper += count[s];
    }
    r.exact = true;
    r.p = std::min(1.0, 2.0 * std::min(lower, upper) / all);
    return r;
  }
  double tie_term = 0.0;
  std::vector<double> sorted = ranks;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  const double mean = n * (n + 1.0) / 4.0;
  const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
  r.z = var > 0 ? (r.statistic - mean) / std::sqrt(var) : 0.0;
  r.p = normal_two_sided_p(r.z);
  return r;
}

}  // namespace svsd
