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

#include "dpchaos/disorder.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <set>

namespace dpchaos {
namespace {

// Known-answer vectors published with the Random123 reference code.
TEST(Philox, KnownAnswers) {
  EXPECT_EQ(philox4x32_10({0, 0, 0, 0}, {0, 0}),
            (PhiloxCounter{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
  EXPECT_EQ(philox4x32_10({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff},
                          {0xffffffff, 0xffffffff}),
            (PhiloxCounter{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
  EXPECT_EQ(philox4x32_10({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344},
                          {0xa4093822, 0x299f31d0}),
            (PhiloxCounter{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(Philox, LanesMatchScalar) {
  const PhiloxKey key = philox_key(0x123456789abcdefULL);
  std::vector<std::uint32_t> w0(70), w1(70), w2(70), w3(70);
  for (int len : {1, 7, 16, 33, 70})
    for (auto [dx1, dx2] : {std::pair{0, 1}, {1, -1}, {1, 1}, {-1, 0}}) {
      philox_lanes(12, -5, dx1, 9, dx2, 3, key, len, w0.data(), w1.data(), w2.data(), w3.data());
      for (int l = 0; l < len; ++l) {
        const auto r = philox4x32_10(
            {12, std::uint32_t(-5 + l * dx1), std::uint32_t(9 + l * dx2), 3}, key);
        ASSERT_EQ(r, (PhiloxCounter{w0[l], w1[l], w2[l], w3[l]})) << len << ' ' << l;
      }
    }
}

TEST(Ziggurat, MomentsAndDistribution) {
  const PhiloxKey key = philox_key(2026);
  const int n = 400000;
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = site_normal(key, {std::uint32_t(i % 1000), i / 1000, 0, 1});
  double m1 = 0, m2 = 0, m4 = 0;
  for (double x : v) {
    m1 += x;
    m2 += x * x;
    m4 += x * x * x * x;
  }
  m1 /= n;
  m2 /= n;
  m4 /= n;
  EXPECT_LT(std::abs(m1), 4 / std::sqrt(double(n)));
  EXPECT_LT(std::abs(m2 - 1), 4 * std::sqrt(2.0 / n));
  EXPECT_LT(std::abs(m4 - 3), 4 * std::sqrt(96.0 / n));

  std::sort(v.begin(), v.end());
  boost::math::normal_distribution<> g;
  double d = 0;
  for (int i = 0; i < n; ++i) {
    const double c = cdf(g, v[i]);
    d = std::max({d, c - double(i) / n, double(i + 1) / n - c});
  }
  EXPECT_LT(d * std::sqrt(double(n)), 1.63);  // Kolmogorov 1% critical value

  // The tail beyond the base strip is reached and has the right mass.
  const double r = detail::ZigguratTables::kR;
  const auto tail = std::count_if(v.begin(), v.end(), [r](double x) { return std::abs(x) > r; });
  const double p = 2 * cdf(complement(g, r));
  EXPECT_NEAR(double(tail) / n, p, 4 * std::sqrt(p / n));
}

TEST(Cgf, Examples) {
  EXPECT_DOUBLE_EQ(cgf(DisorderLaw::gaussian(), 0.8), 0.32);
  EXPECT_EQ(cgf(DisorderLaw::rademacher(), 0.0), 0.0);
  EXPECT_NEAR(cgf(DisorderLaw::rademacher(), 1.0), std::log(std::cosh(1.0)), 1e-15);
  EXPECT_NEAR(cgf(DisorderLaw::rademacher(), 1.0), 0.433781, 1e-6);
  EXPECT_NEAR(cgf(DisorderLaw::rademacher(), -40.0), 40 - std::log(2.0), 1e-12);
  const auto table = DisorderLaw::discrete({-1, 1}, {0.5, 0.5});
  for (double b : {0.0, 0.3, -2.0, 50.0})
    EXPECT_NEAR(table.cgf(b), cgf(DisorderLaw::rademacher(), b), 1e-13 * (1 + std::abs(b)));
}

TEST(Cgf, ConvexWithZeroAtOrigin) {
  const auto three = DisorderLaw::discrete({-std::sqrt(3.0), 0, std::sqrt(3.0)}, {1.0 / 6, 2.0 / 3, 1.0 / 6});
  for (const auto& law : {DisorderLaw::gaussian(), DisorderLaw::rademacher(), three}) {
    EXPECT_EQ(law.cgf(0), 0);
    for (double b = -3; b < 3; b += 0.25)
      EXPECT_GE(law.cgf(b - 0.1) + law.cgf(b + 0.1), 2 * law.cgf(b) - 1e-14);
  }
  EXPECT_THROW(DisorderLaw::discrete({0, 1}, {0.5, 0.5}), DomainError);
  EXPECT_THROW(DisorderLaw::discrete({-1, 1}, {0.4, 0.4}), DomainError);
}

TEST(Schedule, Examples) {
  const auto s = make_schedule(0.5, 2, DisorderLaw::gaussian());
  EXPECT_NEAR(s.beta_N, 0.8, 1e-15);
  EXPECT_NEAR(s.sigma2(), 0.896481, 1e-6);
  EXPECT_NEAR(s.sigma2(), std::expm1(0.64), 1e-14);

  const auto big = make_schedule(0.5, 1000000, DisorderLaw::gaussian());
  EXPECT_NEAR(big.effective_strength() / 0.25, 1.0, 0.05);
  // sigma_N / beta_N = 1 + beta_N^2 / 4 + ... for the Gaussian law.
  EXPECT_NEAR(big.sigma_N / big.beta_N, 1 + sq(big.beta_N) / 4, 1e-3);
  EXPECT_LT(big.sigma_N / big.beta_N, s.sigma_N / s.beta_N);

  EXPECT_THROW(make_schedule(1.2, 10, DisorderLaw::gaussian()), DomainError);
  EXPECT_THROW(make_schedule(0.0, 10, DisorderLaw::gaussian()), DomainError);
  EXPECT_THROW(make_schedule(0.5, 0, DisorderLaw::gaussian()), DomainError);
}

TEST(Schedule, RademacherSigma) {
  const auto s = make_schedule(0.3, 64, DisorderLaw::rademacher());
  const double b = s.beta_N;
  EXPECT_NEAR(s.sigma2(), std::cosh(2 * b) / sq(std::cosh(b)) - 1, 1e-14);
}

DisorderPlane plane(LawKind k, std::uint32_t sample = 0, double beta_hat = 0.5, int N = 64) {
  const auto law = k == LawKind::kGaussian ? DisorderLaw::gaussian() : DisorderLaw::rademacher();
  return DisorderPlane(42, sample, law, make_schedule(beta_hat, N, law), 50);
}

TEST(DisorderPlane, Deterministic) {
  const auto p = plane(LawKind::kGaussian);
  const auto q = plane(LawKind::kGaussian);
  for (int n : {1, 17, 64})
    for (Site z : {Site{0, 0}, Site{-50, 3}, Site{7, 50}}) {
      EXPECT_EQ(p.sample_eta(n, z), p.sample_eta(n, z));
      EXPECT_EQ(p.sample_eta(n, z), q.sample_eta(n, z));
    }
  EXPECT_NE(p.sample_eta(3, {1, 2}), plane(LawKind::kGaussian, 1).sample_eta(3, {1, 2}));
}

TEST(DisorderPlane, RejectsOutOfDomain) {
  const auto p = plane(LawKind::kGaussian);
  EXPECT_THROW(p.sample_eta(0, {0, 0}), DomainError);
  EXPECT_THROW(p.sample_eta(65, {0, 0}), DomainError);
  EXPECT_THROW(p.sample_eta(1, {51, 0}), DomainError);
  std::vector<double> buf(10);
  EXPECT_THROW(p.fill_weights(1, {45, 0}, {1, 0}, 10, buf.data()), DomainError);
}

TEST(DisorderPlane, RowFillMatchesPointQueries) {
  for (LawKind k : {LawKind::kGaussian, LawKind::kRademacher}) {
    const auto p = plane(k, 5);
    std::vector<double> row(101);
    for (int n : {1, 2, 40}) {
      for (int x1 : {-50, -49, -47}) {
        p.fill_weights(n, {x1, 50}, {1, -1}, 97, row.data());
        for (int l = 0; l < 97; ++l) ASSERT_EQ(row[l], p.sample_weight(n, {x1 + l, 50 - l}));
      }
      p.fill_eta(n, {-50, 0}, {1, 0}, 101, row.data());
      for (int l = 0; l < 101; ++l) ASSERT_EQ(row[l], p.sample_eta(n, {-50 + l, 0}));
    }
  }
}

TEST(DisorderPlane, TiltIdentity) {
  const auto p = plane(LawKind::kGaussian, 3);
  const auto& s = p.schedule();
  for (int n = 1; n <= 64; n += 9)
    for (int x = -40; x <= 40; x += 13) {
      const double omega = p.sample_omega(n, {x, 1});
      const double eta = p.sample_eta(n, {x, 1});
      EXPECT_NEAR(std::exp(s.beta_N * omega - s.lambda) - 1 - s.sigma_N * eta, 0, 1e-14);
    }
}

TEST(DisorderPlane, RademacherTwoPointLaw) {
  const auto p = plane(LawKind::kRademacher);
  const auto& s = p.schedule();
  const double up = std::expm1(s.beta_N - s.lambda) / s.sigma_N;
  const double down = std::expm1(-s.beta_N - s.lambda) / s.sigma_N;
  std::set<double> seen;
  for (int n = 1; n <= 20; ++n)
    for (int x = -10; x <= 10; ++x) {
      const double e = p.sample_eta(n, {x, -x});
      EXPECT_TRUE(std::abs(e - up) < 1e-14 || std::abs(e - down) < 1e-14) << e;
      seen.insert(e);
    }
  EXPECT_EQ(seen.size(), 2u);
}

struct Moments {
  double mean, var, var_se;
};

Moments eta_moments(const DisorderPlane& p, int count) {
  std::vector<double> row(101);
  double s1 = 0, s2 = 0, s4 = 0;
  int seen = 0;
  const int R = p.box_radius();
  for (int n = 1; seen < count && n <= p.horizon(); ++n)
    for (int x1 = -R; x1 <= R && seen < count; ++x1)
      for (int x2 = -R; x2 + 100 <= R && seen < count; x2 += 101) {
      p.fill_eta(n, {x1, x2}, {0, 1}, 101, row.data());
      for (double e : row) {
        s1 += e;
        s2 += e * e;
        s4 += e * e * e * e;
      }
      seen += 101;
      }
  if (seen < count) throw std::logic_error("plane too small for the requested count");
  const double m = s1 / seen;
  const double v = s2 / seen - m * m;
  return {m, v, std::sqrt((s4 / seen - v * v) / seen)};
}

TEST(DisorderPlane, EtaIsCentredWithUnitVariance) {
  const int count = 101 * 101 * 98;  // about 10^6 sites
  for (LawKind k : {LawKind::kGaussian, LawKind::kRademacher}) {
    const auto p = plane(k, 11, 0.5, 98);
    const auto m = eta_moments(p, count);
    EXPECT_LT(std::abs(m.mean), 4 / std::sqrt(double(count))) << law_name(k);
    EXPECT_NEAR(m.var, 1.0, 0.01) << law_name(k);
  }
  // Strong couplings stress the skewed tail of the tilt. At N = 2 the weight
  // has a heavy log-normal tail, so only the mean is checked there.
  const auto law = DisorderLaw::gaussian();
  const DisorderPlane strong(42, 12, law, make_schedule(0.9, 2, law), 800);
  EXPECT_LT(std::abs(eta_moments(strong, count).mean), 4 / std::sqrt(double(count)));
  const auto m = eta_moments(DisorderPlane(42, 12, law, make_schedule(0.9, 64, law), 100), count);
  EXPECT_NEAR(m.var, 1.0, 4 * m.var_se);
}

TEST(DisorderPlane, IndependentAcrossSamples) {
  const auto p = plane(LawKind::kGaussian, 20);
  const auto q = plane(LawKind::kGaussian, 21);
  std::vector<double> a(101), b(101);
  double s = 0;
  int count = 0;
  for (int n = 1; n <= 10; ++n)
    for (int x1 = -50; x1 <= 50 && count < 100000; ++x1) {
      p.fill_eta(n, {x1, -50}, {0, 1}, 101, a.data());
      q.fill_eta(n, {x1, -50}, {0, 1}, 101, b.data());
      for (int l = 0; l < 101; ++l) s += a[l] * b[l];
      count += 101;
    }
  EXPECT_LT(std::abs(s / count), 4 / std::sqrt(double(count)));
}

TEST(DisorderPlane, NoDisorderGivesUnitWeights) {
  const auto law = DisorderLaw::gaussian();
  const DisorderPlane p(1, 0, law, fixed_schedule(0.0, 8, law), 8);
  EXPECT_EQ(p.sample_weight(3, {1, 0}), 1.0);
  EXPECT_EQ(p.sample_eta(3, {1, 0}), 0.0);
}

}  // namespace
}  // namespace dpchaos
