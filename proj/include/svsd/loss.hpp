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
#include <vector>

#include "svsd/diffcore.hpp"

namespace svsd {

inline constexpr double kProbabilityEpsilon = 1e-7;
inline constexpr double kDefaultAlpha = 0.9;

enum class LossVariant { kNaive, kMaximumLikelihood };

struct LossBreakdown {
  double mse = 0.0;
  double cross_entropy = 0.0;
  double combined = 0.0;
  double alpha = kDefaultAlpha;
  double sigma_sq = 1.0;  // meaningful for the likelihood variant only
  long n_svs = 0;
  long m_svd = 0;
};

/// Mean squared difference over all entries of one excerpt.
double mse_loss(const Tensor3<double> &estimates, const Tensor3<double> &targets);
/// Batch average of the per-excerpt mean.
double mse_loss(std::span<const Tensor3<double>> estimates,
                std::span<const Tensor3<double>> targets);
/// dLoss/destimates for the single-excerpt mean, scaled by `weight`.
Tensor3<double> mse_gradient(const Tensor3<double> &estimates,
                             const Tensor3<double> &targets, double weight = 1.0);

/// Frame-averaged binary cross-entropy with probabilities clamped to
/// [eps, 1 - eps].
double ce_loss(std::span<const double> probs, std::span<const std::uint8_t> labels);
double ce_loss(std::span<const std::vector<double>> probs,
               std::span<const std::vector<std::uint8_t>> labels);
/// dLoss/dprobs of the clamped loss (zero where the clamp is active), scaled
/// by `weight`.
std::vector<double> ce_gradient(std::span<const double> probs,
                                std::span<const std::uint8_t> labels,
                                double weight = 1.0);

double mtl_loss(double mse, double ce, double alpha);

struct MlLoss {
  double value = 0.0;  // quantity to minimise
  double d_mse = 0.0;
  double d_ce = 0.0;
  double d_log_sigma = 0.0;
  double sigma_sq = 1.0;
};

/// Scaled negative log-likelihood with a learnable output variance:
///   1/(2 s^2) * N/(N+M) * mse + N/(N+M) * log s + 1/(2F) * M/(N+M) * ce
/// with s = exp(log_sigma).
MlLoss ml_loss(double mse, double ce, double log_sigma, double n, double m,
               double f);

/// Variance at which the likelihood loss equals the naive loss plus a
/// constant: F N / (2 F N + 2 M F - M).
double ml_equivalent_sigma_sq(double n, double m, double f);
/// Weight of the MSE term implied by a given variance.
double ml_induced_alpha(double sigma_sq, double n, double m);

}  // namespace svsd
