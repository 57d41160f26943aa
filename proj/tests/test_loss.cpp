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

#include <cmath>
#include <random>

#include "svsd/error.hpp"
#include "svsd/loss.hpp"
#include "test_util.hpp"

using namespace svsd;
using namespace svsd::testing;

namespace {

double CeOracle(const std::vector<double> &p, const std::vector<std::uint8_t> &y) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = std::min(std::max(p[i], 1e-7), 1.0 - 1e-7);
    s -= y[i] ? std::log(q) : std::log(1.0 - q);
  }
  return s / static_cast<double>(p.size());
}

// Appendix objective written out term by term, independent of ml_loss.
double MlOracle(double mse, double ce, double log_sigma, double n, double m, double f) {
  const double s2 = std::exp(2 * log_sigma);
  return (1.0 / (2 * s2)) * (n / (n + m)) * mse + (n / (n + m)) * log_sigma +
         (1.0 / (2 * f)) * (m / (n + m)) * ce;
}

}  // namespace

TEST_SUITE("loss") {

TEST_CASE("mse examples and loop oracle") {
  std::mt19937_64 rng(1);
  const auto a = RandomTensor<double>(rng, 7, 5, 2);
  CHECK(mse_loss(a, a) == 0.0);
  Tensor3<double> b = a;
  for (auto &v : b.storage()) v += 1.0;
  CHECK(mse_loss(b, a) == doctest::Approx(1.0).epsilon(1e-15));
  const auto c = RandomTensor<double>(rng, 7, 5, 2);
  double oracle = 0.0;
  for (int f = 0; f < 7; ++f)
    for (int t = 0; t < 5; ++t)
      for (int k = 0; k < 2; ++k) oracle += (a(f, t, k) - c(f, t, k)) * (a(f, t, k) - c(f, t, k));
  oracle /= 70.0;
  CHECK(std::abs(mse_loss(a, c) - oracle) < 1e-12);
  CHECK_THROWS_AS(mse_loss(a, Tensor3<double>(7, 5, 1)), Error);
}

TEST_CASE("batch mse is permutation invariant") {
  std::mt19937_64 rng(2);
  std::vector<Tensor3<double>> e, t;
  for (int i = 0; i < 4; ++i) {
    e.push_back(RandomTensor<double>(rng, 3, 4, 2));
    t.push_back(RandomTensor<double>(rng, 3, 4, 2));
  }
  const double fwd = mse_loss(e, t);
  std::swap(e[0], e[3]);
  std::swap(t[0], t[3]);
  CHECK(fwd == doctest::Approx(mse_loss(e, t)).epsilon(1e-15));
}

TEST_CASE("mse gradient matches finite differences") {
  std::mt19937_64 rng(3);
  auto e = RandomTensor<double>(rng, 4, 3, 2);
  const auto t = RandomTensor<double>(rng, 4, 3, 2);
  const auto g = mse_gradient(e, t, 0.7);
  for (std::size_t i = 0; i < e.size(); ++i) {
    const double keep = e.storage()[i];
    e.storage()[i] = keep + 1e-6;
    const double up = 0.7 * mse_loss(e, t);
    e.storage()[i] = keep - 1e-6;
    const double down = 0.7 * mse_loss(e, t);
    e.storage()[i] = keep;
    CHECK(g.storage()[i] == doctest::Approx((up - down) / 2e-6).epsilon(1e-6));
  }
}

TEST_CASE("cross-entropy examples and loop oracle") {
  const std::vector<double> exact = {0.0, 1.0, 1.0, 0.0};
  const std::vector<std::uint8_t> labels = {0, 1, 1, 0};
  CHECK(ce_loss(exact, labels) < 1e-6);
  const std::vector<double> half(4, 0.5);
  CHECK(ce_loss(half, labels) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  std::mt19937_64 rng(4);
  const auto p = RandomVector(rng, 50, 0.0, 1.0);
  std::vector<std::uint8_t> y(50);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = (rng() & 1u) != 0;
  CHECK(std::abs(ce_loss(p, y) - CeOracle(p, y)) < 1e-12);
  CHECK(ce_loss(p, y) >= 0.0);
  CHECK_THROWS_AS(ce_loss(half, std::vector<std::uint8_t>{0, 1}), Error);
}

TEST_CASE("cross-entropy gradient matches finite differences away from the clamp") {
  std::mt19937_64 rng(5);
  auto p = RandomVector(rng, 20, 0.05, 0.95);
  std::vector<std::uint8_t> y(20);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = i % 3 == 0;
  const auto g = ce_gradient(p, y, 0.3);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double keep = p[i];
    p[i] = keep + 1e-7;
    const double up = 0.3 * ce_loss(p, y);
    p[i] = keep - 1e-7;
    const double down = 0.3 * ce_loss(p, y);
    p[i] = keep;
    CHECK(g[i] == doctest::Approx((up - down) / 2e-7).epsilon(1e-5));
  }
  const std::vector<double> clamped = {0.0, 1.0};
  const auto gz = ce_gradient(clamped, std::vector<std::uint8_t>{1, 0});
  CHECK(gz[0] == 0.0);
  CHECK(gz[1] == 0.0);
}

TEST_CASE("mtl combination") {
  CHECK(mtl_loss(0.3, 0.8, 1.0) == 0.3);
  CHECK(mtl_loss(0.3, 0.8, 0.0) == 0.8);
  CHECK(mtl_loss(0.02, 0.7, 0.9) == doctest::Approx(0.088).epsilon(1e-14));
  CHECK_THROWS_AS(mtl_loss(0.1, 0.1, 1.5), Error);
}

TEST_CASE("likelihood loss value and gradients") {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 20; ++i) {
    const auto v = RandomVector(rng, 3, 0.01, 1.0);
    const double ls = (v[2] - 0.5) * 2.0;
    const MlLoss l = ml_loss(v[0], v[1], ls, 4, 6, 257);
    CHECK(l.value == doctest::Approx(MlOracle(v[0], v[1], ls, 4, 6, 257)).epsilon(1e-13));
    const double h = 1e-6;
    CHECK(l.d_mse == doctest::Approx((MlOracle(v[0] + h, v[1], ls, 4, 6, 257) -
                                      MlOracle(v[0] - h, v[1], ls, 4, 6, 257)) / (2 * h))
                         .epsilon(1e-6));
    CHECK(l.d_ce == doctest::Approx((MlOracle(v[0], v[1] + h, ls, 4, 6, 257) -
                                     MlOracle(v[0], v[1] - h, ls, 4, 6, 257)) / (2 * h))
                        .epsilon(1e-6));
    CHECK(l.d_log_sigma == doctest::Approx((MlOracle(v[0], v[1], ls + h, 4, 6, 257) -
                                            MlOracle(v[0], v[1], ls - h, 4, 6, 257)) / (2 * h))
                               .epsilon(1e-6));
  }
}

TEST_CASE("equivalent variance for N=4, M=6, F=257") {
  const double s2 = ml_equivalent_sigma_sq(4, 6, 257);
  CHECK(s2 == doctest::Approx(1028.0 / 5134.0).epsilon(1e-15));
  // Induced weights are an affine combination.
  const double alpha = ml_induced_alpha(s2, 4, 6);
  CHECK(alpha == doctest::Approx((4.0 / 10.0) / (2 * s2)).epsilon(1e-15));
  CHECK(1.0 - alpha == doctest::Approx(6.0 / (2 * 257.0 * 10.0)).epsilon(1e-12));
}

TEST_CASE("at the equivalent variance the loss is the naive loss plus a constant") {
  const double n = 4, m = 6, f = 257;
  const double s2 = ml_equivalent_sigma_sq(n, m, f);
  const double ls = 0.5 * std::log(s2);
  const double alpha = ml_induced_alpha(s2, n, m);
  std::mt19937_64 rng(7);
  for (int i = 0; i < 200; ++i) {
    const auto v = RandomVector(rng, 2, 0.0, 2.0);
    const double lhs = ml_loss(v[0], v[1], ls, n, m, f).value;
    const double rhs = mtl_loss(v[0], v[1], alpha) + (n / (n + m)) * ls;
    CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(std::abs(lhs), 1e-300));
  }
}

TEST_CASE("log-sigma derivative at the stationary point") {
  // Stationary in sigma where the two sigma terms balance: s^2 = mse.
  const double mse = 0.3, ce = 0.6, n = 4, m = 6, f = 257;
  const double ls = 0.5 * std::log(mse);
  const MlLoss l = ml_loss(mse, ce, ls, n, m, f);
  const double h = 1e-5;
  const double fd = (MlOracle(mse, ce, ls + h, n, m, f) - MlOracle(mse, ce, ls - h, n, m, f)) / (2 * h);
  CHECK(std::abs(l.d_log_sigma - fd) < 1e-6);
  CHECK(std::abs(l.d_log_sigma) < 1e-12);
}

}  // TEST_SUITE
