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

#include "dpchaos/walk_kernels.hpp"

#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/expint.hpp>
#include <map>
#include <sstream>

namespace dpchaos {
namespace {

// Enumerates all 4^n nearest-neighbour paths; returns endpoint frequencies.
std::map<std::pair<int, int>, double> enumerate_paths(int n) {
  std::map<std::pair<int, int>, double> out;
  const long total = 1L << (2 * n);
  for (long code = 0; code < total; ++code) {
    Site x{};
    long c = code;
    for (int s = 0; s < n; ++s, c >>= 2) x = x + kNeighbours[c & 3];
    out[{x.x1, x.x2}] += 1.0 / double(total);
  }
  return out;
}

TEST(RwKernel1d, Examples) {
  EXPECT_DOUBLE_EQ(rw_kernel_1d(1, 1), 0.5);
  EXPECT_DOUBLE_EQ(rw_kernel_1d(2, 0), 0.5);
  EXPECT_EQ(rw_kernel_1d(2, 3), 0.0);
  EXPECT_EQ(rw_kernel_1d(3, 0), 0.0);
  EXPECT_DOUBLE_EQ(rw_kernel_1d(0, 0), 1.0);
}

TEST(RwKernel1d, LogSpaceMatchesProductAcrossThreshold) {
  for (int n : {513, 600, 800, 1000})
    for (int k : {0, 2, 10, 40, 100}) {
      const int kk = (n + k) % 2 == 0 ? k : k + 1;
      const double direct = detail::half_binomial_product(n, (n + kk) / 2);
      EXPECT_NEAR(rw_kernel_1d(n, kk) / direct, 1.0, 1e-13) << n << ' ' << kk;
    }
}

TEST(RwKernel1d, SumsToOne) {
  for (int n : {1, 7, 100, 1000}) {
    CompensatedSum s;
    for (int k = -n; k <= n; ++k) s += rw_kernel_1d(n, k);
    EXPECT_NEAR(s.value(), 1.0, 1e-13);
  }
}

TEST(RwKernel2d, Examples) {
  EXPECT_DOUBLE_EQ(rw_kernel_2d(1, {1, 0}), 0.25);
  EXPECT_DOUBLE_EQ(rw_kernel_2d(2, {0, 0}), 0.25);
  EXPECT_DOUBLE_EQ(rw_kernel_2d(2, {1, 1}), 0.125);
  EXPECT_EQ(rw_kernel_2d(2, {1, 0}), 0.0);
}

TEST(RwKernel2d, MatchesPathEnumeration) {
  for (int n = 1; n <= 7; ++n) {
    const auto freq = enumerate_paths(n);
    for (int a = -n; a <= n; ++a)
      for (int b = -n; b <= n; ++b) {
        const auto it = freq.find({a, b});
        const double expect = it == freq.end() ? 0.0 : it->second;
        EXPECT_NEAR(rw_kernel_2d(n, {a, b}), expect, 1e-15);
      }
  }
}

TEST(RwKernel2d, LatticeSymmetries) {
  for (int n : {5, 12, 31})
    for (int a = -n; a <= n; ++a)
      for (int b = -n; b <= n; ++b) {
        const double q = rw_kernel_2d(n, {a, b});
        EXPECT_EQ(q, rw_kernel_2d(n, {-a, b}));
        EXPECT_EQ(q, rw_kernel_2d(n, {a, -b}));
        EXPECT_DOUBLE_EQ(q, rw_kernel_2d(n, {b, a}));
      }
}

TEST(KernelTable, Examples) {
  const auto t1 = build_kernel_table(1, 2);
  for (Site e : kNeighbours) EXPECT_DOUBLE_EQ(t1.at(1, e), 0.25);
  EXPECT_EQ(t1.at(1, {0, 0}), 0.0);
  EXPECT_EQ(t1.at(1, {1, 1}), 0.0);
  EXPECT_NEAR(t1.mass(1), 1.0, 1e-15);

  const auto t2 = build_kernel_table(2, 4);
  EXPECT_DOUBLE_EQ(t2.at(2, {0, 0}), 0.25);

  EXPECT_THROW(build_kernel_table(3, 1), DomainError);
  EXPECT_THROW(build_kernel_table(0, 3), DomainError);
  EXPECT_THROW(build_kernel_table(1000, 1000), BudgetError);
}

TEST(KernelTable, ProductFormulaMatchesConvolution) {
  const int n_max = 30;
  const auto table = build_kernel_table(n_max, n_max);
  for (int n = 1; n <= n_max; ++n) {
    EXPECT_NEAR(table.mass(n), 1.0, 1e-12);
    EXPECT_NEAR(table.sum_of_squares(n), collision_weight(n), 1e-10);
    table.for_each_site([&](Site x) {
      ASSERT_NEAR(table.at(n, x), rw_kernel_2d(n, x), 1e-12) << n;
    });
  }
}

TEST(KernelTable, CsvExport) {
  std::ostringstream os;
  build_kernel_table(1, 1).write_csv(os);
  EXPECT_EQ(os.str().substr(0, 9), "n,x1,x2,q");
  int lines = 0;
  for (char c : os.str()) lines += c == '\n';
  EXPECT_EQ(lines, 5);
}

TEST(CollisionWeight, Examples) {
  EXPECT_DOUBLE_EQ(collision_weight(1), 0.25);
  EXPECT_DOUBLE_EQ(collision_weight(2), 9.0 / 64.0);
  EXPECT_NEAR(10000 * collision_weight(10000) * kPi, 1.0, 1e-4);
  EXPECT_THROW(collision_weight(0), DomainError);
}

TEST(CollisionWeight, TimesNApproachesInversePiMonotonically) {
  double prev = 0.0;
  for (int n = 1; n <= 5000; n += 7) {
    const double v = n * collision_weight(n);
    EXPECT_GT(v, prev);
    EXPECT_LT(v, 1.0 / kPi);
    prev = v;
  }
}

TEST(OverlapSum, Examples) {
  EXPECT_DOUBLE_EQ(overlap_sum(1).r_at(1), 0.25);
  EXPECT_DOUBLE_EQ(overlap_sum(2).r_at(2), 25.0 / 64.0);
  const auto big = overlap_sum(1000000);
  EXPECT_NEAR(big.r_at(1000000) / (std::log(1e6) / kPi), 1.0, 0.05);
  for (int n = 2; n <= big.horizon(); n += 997) EXPECT_GE(big.r_at(n), big.r_at(n - 1));
}

TEST(LltGaussian, Examples) {
  EXPECT_EQ(llt_gaussian(5, {0, 0}), 0.0);
  EXPECT_NEAR(llt_gaussian(100, {0, 0}), 2.0 / (100 * kPi), 1e-15);
  EXPECT_NEAR(llt_gaussian(100, {0, 0}), 0.006366, 1e-6);
  EXPECT_LT(std::abs(llt_gaussian(1000, {0, 0}) / rw_kernel_2d(1000, {0, 0}) - 1.0), 0.01);
}

TEST(LltGaussian, ErrorAtOriginDecreases) {
  double prev = 1.0;
  for (int n : {100, 400, 1600}) {
    const double err = std::abs(llt_gaussian(n, {0, 0}) / rw_kernel_2d(n, {0, 0}) - 1.0);
    EXPECT_LT(err, prev);
    prev = err;
  }
}

TEST(ExpintE1, MatchesBoost) {
  for (double x : {1e-8, 1e-3, 0.1, 0.5, 0.999, 1.0, 1.5, 3.0, 10.0, 50.0, 300.0})
    EXPECT_NEAR(expint_e1(x) / boost::math::expint(1, x), 1.0, 1e-13) << x;
  EXPECT_THROW(expint_e1(0.0), DomainError);
}

double heat_quadrature(double a, double b, double r2) {
  auto g = [r2](double u) { return std::exp(-r2 / (2 * u)) / (2 * kPi * u); };
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(g, a, b, 15, 1e-14);
}

TEST(HeatTimeIntegral, Examples) {
  const Vec2 y{1.0, 1.0};
  EXPECT_EQ(heat_time_integral(1.5, 1.5, y), 0.0);
  const double v = heat_time_integral(1.0, 2.0, y);
  EXPECT_NEAR(v, 0.05418, 1e-5);
  EXPECT_NEAR(v / heat_quadrature(1.0, 2.0, 2.0), 1.0, 1e-8);
  EXPECT_NEAR(heat_time_integral(1.0, 4.0, y),
              heat_time_integral(1.0, 2.0, y) + heat_time_integral(2.0, 4.0, y), 1e-12);
  EXPECT_THROW(heat_time_integral(1.0, 2.0, Vec2{0.0, 0.0}), DivergenceError);
  EXPECT_THROW(heat_time_integral(0.0, 2.0, y), DomainError);
}

TEST(HeatTimeIntegral, ClosedFormAgreesWithQuadrature) {
  for (double r2 : {1e-4, 0.01, 0.3, 2.0, 9.0, 40.0})
    for (auto [a, b] : {std::pair{0.01, 0.02}, {0.1, 1.0}, {0.5, 3.0}, {2.0, 50.0}}) {
      const double q = heat_quadrature(a, b, r2);
      if (q < 1e-200) continue;
      EXPECT_NEAR(heat_time_integral_r2(a, b, r2) / q, 1.0, 1e-8) << r2 << ' ' << a << ' ' << b;
    }
}

TEST(HeatTimeIntegral, MonotoneInUpperLimit) {
  const Vec2 y{0.3, -0.4};
  double prev = 0.0;
  for (double b = 0.2; b < 20.0; b *= 1.3) {
    const double v = heat_time_integral(0.1, b, y);
    EXPECT_GE(v, prev);
    prev = v;
  }
}

}  // namespace
}  // namespace dpchaos
