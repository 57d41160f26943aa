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
#include <span>
#include <string>
#include <vector>

namespace svsd {

/// Midranks (1-based) of the values; ties share the mean rank.
std::vector<double> midranks(std::span<const double> values);

/// Mann-Whitney estimate of the area under the ROC curve with midrank
/// ties. Throws unless both classes are present.
double au_roc(std::span<const double> scores, std::span<const std::uint8_t> labels);

struct DelongResult {
  double auc_a = 0.0;
  double auc_b = 0.0;
  double variance = 0.0;  // of auc_a - auc_b
  double z = 0.0;
  double p = 1.0;
};

/// Paired comparison of two AUCs on the same labels using the DeLong
/// covariance (fast midrank formulation); two-sided normal p-value.
DelongResult delong_test(std::span<const double> scores_a, std::span<const double> scores_b,
                         std::span<const std::uint8_t> labels);

struct WilcoxonResult {
  double statistic = 0.0;  // W+ : rank sum of positive differences
  double p = 1.0;
  int n = 0;               // non-zero differences
  bool exact = false;
  double z = 0.0;          // normal approximation only
};

/// Two-sided signed-rank test on a - b. Zero differences are dropped; exact
/// null distribution (over doubled midranks) for n <= 25, otherwise a
/// tie-corrected normal approximation.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);

/// Two-sided standard normal tail probability of |z|.
double normal_two_sided_p(double z);

}  // namespace svsd
