// Copyright 2026 The dpchaos Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dpchaos/stats.hpp"

#include <gtest/gtest.h>

#include <random>

namespace dpchaos {
namespace {

std::vector<double> normal_draws(std::size_t n, double mean, double sd, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> d(mean, sd);
  std::vector<double> v(n);
  for (double& x : v) x = d(g);
  return v;
}

TEST(Targets, Lognormal) {
  const auto t = lognormal_target(0.5);
  EXPECT_NEAR(t.mean, -0.143841, 1e-6);
  EXPECT_NEAR(t.variance, 0.287682, 1e-6);
  EXPECT_NEAR(lognormal_target(0.9).variance, 1.660731, 1e-6);
  EXPECT_NEAR(lognormal_target(1e-6).variance, 0.0, 1e-11);
  EXPECT_THROW(lognormal_target(1.0), DomainError);
  EXPECT_THROW(lognormal_target(0.0), DomainError);
}

TEST(Targets, Singular) {
  const auto t = singular_target(0.5, 1.0);
  EXPECT_DOUBLE_EQ(t.cov[0][0], 1.0);
  EXPECT_NEAR(t.cov[1][1], 1.0 / 3.0, 1e-15);
  EXPECT_EQ(t.cov[0][1], 0.0);
  const auto u = singular_target(0.8, 2.0);
  EXPECT_NEAR(u.cov[1][1], 3.5556, 1e-4);
  EXPECT_NEAR(singular_target(1e-8, 1.5).cov[1][1], 0.0, 1e-15);
  EXPECT_THROW(singular_target(0.5, 0.0), DomainError);
}

TEST(Moments, SmallBatchByHand) {
  const std::vector<double> x{1, 2, 4, 7};
  const auto m = moments_summary(x);
  EXPECT_DOUBLE_EQ(m.mean.value, 3.5);
  EXPECT_NEAR(m.variance.value, (6.25 + 2.25 + 0.25 + 12.25) / 3, 1e-14);
  // The jackknife SE of the mean is s / sqrt(n).
  EXPECT_NEAR(m.mean.se, std::sqrt(m.variance.value / 4), 1e-14);
  const double m2 = 21.0 / 4, m3 = (-15.625 - 3.375 + 0.125 + 42.875) / 4;
  EXPECT_NEAR(m.skewness.value, m3 / std::pow(m2, 1.5), 1e-14);
  EXPECT_THROW(moments_summary({1, 1, 1}), DomainError);
}

TEST(Moments, VarianceErrorMatchesGaussianTheory) {
  const auto x = normal_draws(20000, 1.0, 2.0, 5);
  const auto m = moments_summary(x);
  EXPECT_NEAR(m.variance.se, 4.0 * std::sqrt(2.0 / 20000), 0.1 * 4.0 * std::sqrt(2.0 / 20000));
  EXPECT_NEAR(m.skewness.se, std::sqrt(6.0 / 20000), 0.1 * std::sqrt(6.0 / 20000));
  EXPECT_LT(std::abs(m.variance.value - 4.0), 3 * m.variance.se);
}

TEST(Covariance, ByHandAndIndependentStreams) {
  const std::vector<double> x{1, 2, 3, 4}, y{2, 1, 4, 3};
  const auto c = empirical_cov(x, y);
  EXPECT_NEAR(c.cov[0][1].value, (-1.5 * -0.5 + -0.5 * -1.5 + 0.5 * 1.5 + 1.5 * 0.5) / 3, 1e-15);
  EXPECT_NEAR(c.cov[0][0].value, 5.0 / 3, 1e-15);
  const auto a = normal_draws(5000, 0, 1, 11), b = normal_draws(5000, 0, 3, 12);
  const auto d = empirical_cov(a, b);
  EXPECT_LT(std::abs(d.cov[0][1].value), 3 * d.cov[0][1].se);
  EXPECT_NEAR(d.cov[0][1].se, 3.0 / std::sqrt(5000.0), 0.1 * 3.0 / std::sqrt(5000.0));
}

TEST(Kolmogorov, ExactDistribution) {
  EXPECT_NEAR(kolmogorov_cdf(10, 0.274), 0.6284796154565043, 1e-13);
  // D_1 = max(U, 1 - U).
  EXPECT_NEAR(kolmogorov_cdf(1, 0.8), 0.6, 1e-14);
  EXPECT_EQ(kolmogorov_cdf(1, 0.4), 0.0);
  // The limit law at large n.
  const int n = 5000;
  for (double lam : {0.6, 0.9, 1.3})
    EXPECT_NEAR(1 - kolmogorov_cdf(n, lam / std::sqrt(double(n))), kolmogorov_survival_asymptotic(lam), 0.01);
}

TEST(Kolmogorov, DistributionMatchesSimulation) {
  const int n = 20, reps = 100000;
  std::mt19937_64 g(3);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> d(reps);
  std::vector<double> x(n);
  for (int r = 0; r < reps; ++r) {
    for (double& v : x) v = u(g);
    std::sort(x.begin(), x.end());
    double s = 0;
    for (int i = 0; i < n; ++i) s = std::max({s, double(i + 1) / n - x[std::size_t(i)], x[std::size_t(i)] - double(i) / n});
    d[std::size_t(r)] = s;
  }
  for (double t : {0.15, 0.22, 0.3}) {
    const double emp = double(std::count_if(d.begin(), d.end(), [&](double v) { return v < t; })) / reps;
    const double se = std::sqrt(emp * (1 - emp) / reps);
    EXPECT_LT(std::abs(emp - kolmogorov_cdf(n, t)), 4 * se + 1e-12) << t;
  }
}

TEST(Kolmogorov, CalibratedUnderTheNull) {
  int pass = 0;
  for (int r = 0; r < 100; ++r) {
    const auto x = normal_draws(10000, -0.5, 0.7, 1000 + std::uint64_t(r));
    const auto k = ks_normal_test(x, {-0.5, 0.49});
    EXPECT_TRUE(k.exact);
    pass += k.p_value > 0.01;
  }
  EXPECT_GE(pass, 98);
}

TEST(Kolmogorov, PowerAndErrors) {
  auto x = normal_draws(1000, 0, 1, 9);
  for (double& v : x) v += 5;
  EXPECT_LT(ks_normal_test(x, {0, 1}).p_value, 1e-6);
  EXPECT_THROW(ks_normal_test(std::vector<double>(49, 0.1), {0, 1}), DomainError);
  EXPECT_THROW(ks_normal_test(std::vector<double>(60, 0.1), {0, 1}), DomainError);
  const auto big = normal_draws(20000, 0, 1, 4);
  const auto k = ks_normal_test(big, {0, 1});
  EXPECT_FALSE(k.exact);
  EXPECT_GT(k.p_value, 0.0);
  EXPECT_GT(ks_fitted_normal_test(normal_draws(2000, 3, 2, 8)).p_value, 0.01);
}

TEST(Quadrature, GaussLegendreExactForPolynomials) {
  for (int n : {5, 12, 21}) {
    const auto r = detail::gauss_legendre01(n);
    ASSERT_EQ(int(r.x.size()), n);
    double s = 0;
    for (std::size_t i = 0; i < r.x.size(); ++i) s += r.w[i] * std::pow(r.x[i], 2 * n - 1);
    EXPECT_NEAR(s, 1.0 / (2 * n), 1e-14);
  }
}

TEST(EwCovariance, TrivialAndBilinear) {
  const auto f = TestFunction::reference();
  const TestFunction zero(0.35, 0.25, {0, 0}, 0.5, 0.0);
  EXPECT_EQ(ew_covariance_quadrature(f, zero, 0.5).value, 0.0);
  const TestFunction twice(0.35, 0.25, {0, 0}, 0.5, 2.0);
  const auto a = ew_covariance_quadrature(f, f, 0.5);
  const auto b = ew_covariance_quadrature(twice, f, 0.5);
  EXPECT_TRUE(a.converged);
  EXPECT_NEAR(b.value, 2 * a.value, 1e-12 * std::abs(a.value));
  EXPECT_LE(a.error, 1e-3 * a.value);
}

TEST(EwCovariance, SymmetricAndMatchesMonteCarlo) {
  const auto f = TestFunction::reference();
  const TestFunction g(0.55, 0.2, {0.2, -0.1}, 0.4, 1.0);
  const auto fg = ew_covariance_quadrature(f, g, 0.5);
  const auto gf = ew_covariance_quadrature(g, f, 0.5);
  EXPECT_NEAR(fg.value, gf.value, 3 * (fg.error + gf.error) + 1e-12);
  for (const auto& [p, q, v] : {std::tuple{f, f, ew_covariance_quadrature(f, f, 0.5)}, std::tuple{f, g, fg}}) {
    const auto mc = ew_covariance_mc(p, q, 0.5, 2000000, 17);
    EXPECT_LT(std::abs(mc.value - v.value), 3 * std::hypot(mc.se, v.error)) << mc.value << ' ' << v.value;
  }
}

TEST(EwCovariance, KernelScalesWithC2) {
  EXPECT_NEAR(ew_kernel(0.3, 0.4, 0.01, 2.0), 2 * ew_kernel(0.3, 0.4, 0.01, 1.0), 1e-15);
  EXPECT_GT(ew_kernel(0.3, 0.3, 0.01, 1.0), ew_kernel(0.3, 0.5, 0.01, 1.0));
  EXPECT_THROW(ew_kernel(0.3, 0.3, 0.0, 1.0), DivergenceError);
}

TEST(SampleBatch, Validation) {
  SampleBatch b{"z", {1, 2, 3}, {0, 1, 2}, 8, 0.5, ""};
  EXPECT_NO_THROW(b.validate());
  b.ids = {0, 1, 1};
  EXPECT_THROW(b.validate(), DomainError);
  b.values = {1};
  b.ids = {};
  EXPECT_THROW(b.validate(), DomainError);
}

}  // namespace
}  // namespace dpchaos
