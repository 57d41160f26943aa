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

#include "svsd/loss.hpp"

#include <algorithm>
#include <cmath>

#include "svsd/error.hpp"

namespace svsd {
namespace {

void CheckSameShape(const Tensor3<double> &a, const Tensor3<double> &b) {
  Require(a.shape() == b.shape(), ErrorCode::kShape,
          "mse_loss: estimate shape " + to_string(a.shape()) +
              " does not match target shape " + to_string(b.shape()));
  Require(!a.empty(), ErrorCode::kShape, "mse_loss: empty tensors");
}

void CheckLabels(std::span<const double> probs, std::span<const std::uint8_t> labels) {
  Require(probs.size() == labels.size(), ErrorCode::kShape,
          "ce_loss: " + std::to_string(probs.size()) + " probabilities but " +
              std::to_string(labels.size()) + " labels");
  Require(!probs.empty(), ErrorCode::kShape, "ce_loss: no frames");
}

double Clamp(double p) {
  return std::clamp(p, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
}

}  // namespace

double mse_loss(const Tensor3<double> &estimates, const Tensor3<double> &targets) {
  CheckSameShape(estimates, targets);
  double sum = 0.0;
  const auto &e = estimates.data();
  const auto &t = targets.data();
  for (std::size_t i = 0; i < e.size(); ++i) {
    const double d = e[i] - t[i];
    sum += d * d;
  }
  return sum / static_cast<double>(e.size());
}

double mse_loss(std::span<const Tensor3<double>> estimates,
                std::span<const Tensor3<double>> targets) {
  Require(estimates.size() == targets.size() && !estimates.empty(),
          ErrorCode::kShape, "mse_loss: batch size mismatch");
  double sum = 0.0;
  for (std::size_t b = 0; b < estimates.size(); ++b)
    sum += mse_loss(estimates[b], targets[b]);
  return sum / static_cast<double>(estimates.size());
}

Tensor3<double> mse_gradient(const Tensor3<double> &estimates,
                             const Tensor3<double> &targets, double weight) {
  CheckSameShape(estimates, targets);
  Tensor3<double> g(estimates.shape());
  const double scale = 2.0 * weight / static_cast<double>(estimates.size());
  for (std::size_t i = 0; i < g.size(); ++i)
    g.data()[i] = scale * (estimates.data()[i] - targets.data()[i]);
  return g;
}

double ce_loss(std::span<const double> probs, std::span<const std::uint8_t> labels) {
  CheckLabels(probs, labels);
  double sum = 0.0;
  for (std::size_t t = 0; t < probs.size(); ++t) {
    const double p = Clamp(probs[t]);
    sum += labels[t] ? std::log(p) : std::log1p(-p);
  }
  return -sum / static_cast<double>(probs.size());
}

double ce_loss(std::span<const std::vector<double>> probs,
               std::span<const std::vector<std::uint8_t>> labels) {
  Require(probs.size() == labels.size() && !probs.empty(), ErrorCode::kShape,
          "ce_loss: batch size mismatch");
  double sum = 0.0;
  for (std::size_t b = 0; b < probs.size(); ++b) sum += ce_loss(probs[b], labels[b]);
  return sum / static_cast<double>(probs.size());
}

std::vector<double> ce_gradient(std::span<const double> probs,
                                std::span<const std::uint8_t> labels,
                                double weight) {
  CheckLabels(probs, labels);
  const double scale = weight / static_cast<double>(probs.size());
  std::vector<double> g(probs.size(), 0.0);
  for (std::size_t t = 0; t < probs.size(); ++t) {
    const double p = probs[t];
    if (p < kProbabilityEpsilon || p > 1.0 - kProbabilityEpsilon) continue;
    g[t] = scale * (labels[t] ? -1.0 / p : 1.0 / (1.0 - p));
  }
  return g;
}

double mtl_loss(double mse, double ce, double alpha) {
  Require(alpha >= 0.0 && alpha <= 1.0, ErrorCode::kInvalidArgument,
          "mtl_loss: alpha must lie in [0, 1], got " + std::to_string(alpha));
  return alpha * mse + (1.0 - alpha) * ce;
}

MlLoss ml_loss(double mse, double ce, double log_sigma, double n, double m,
               double f) {
  Require(n > 0 && m >= 0 && f > 0, ErrorCode::kInvalidArgument,
          "ml_loss: dataset sizes and bin count must be positive");
  const double share_n = n / (n + m);
  const double share_m = m / (n + m);
  MlLoss r;
  r.sigma_sq = std::exp(2.0 * log_sigma);
  r.d_mse = share_n / (2.0 * r.sigma_sq);
  r.d_ce = share_m / (2.0 * f);
  r.value = r.d_mse * mse + share_n * log_sigma + r.d_ce * ce;
  r.d_log_sigma = -2.0 * r.d_mse * mse + share_n;
  return r;
}

double ml_equivalent_sigma_sq(double n, double m, double f) {
  return f * n / (2.0 * f * n + 2.0 * m * f - m);
}

double ml_induced_alpha(double sigma_sq, double n, double m) {
  return n / (n + m) / (2.0 * sigma_sq);
}

}  // namespace svsd
