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

#include "dpchaos/chaos_exact.hpp"

#include <gtest/gtest.h>

#include <sstream>

namespace dpchaos {
namespace {

struct Fixture {
  DisorderLaw law = DisorderLaw::gaussian();
  CouplingSchedule sch;
  DisorderPlane plane;
  Fixture(int N, double beta_hat, std::uint32_t sample, int R, std::uint64_t seed = 17)
      : sch(make_schedule(beta_hat, N, law)), plane(seed, sample, law, sch, R) {}
};

bool rel_close(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); }

// Space-summed second moments by brute force over time subsets: a chain with
// gaps g_1..g_k has mass sigma^2k prod u_{g_i}.
double brute_moment(int N, double sigma, bool dominated, int lo, int hi, int horizon) {
  const double s2 = sigma * sigma;
  double total = dominated ? 0.0 : 1.0;
  const int T = dominated ? horizon : N;
  for (unsigned mask = 1; mask < (1u << T); ++mask) {
    std::vector<int> t;
    for (int i = 0; i < T; ++i)
      if (mask >> i & 1u) t.push_back(i + 1);
    if (dominated) {
      if (t[0] < lo || t[0] > hi) continue;
      bool ok = true;
      for (std::size_t i = 1; i < t.size(); ++i) ok = ok && t[i] - t[i - 1] <= t[0];
      if (!ok) continue;
    }
    double m = 1;
    int prev = 0;
    for (int v : t) {
      m *= s2 * collision_weight(v - prev);
      prev = v;
    }
    total += m;
  }
  return total;
}

TEST(ChaosEnumeration, EqualsFieldEvolution) {
  for (double bh : {0.3, 0.5})
    for (int N : {1, 3, 5})
      for (int R : {2, policy_box_radius(N)}) {
        const Fixture f(N, bh, 4, R);
        const auto snap = evolve_partition(f.plane, f.sch, R, 0.5);
        const double z = chaos_eval_Z(f.plane, f.sch, {N, R});
        EXPECT_TRUE(rel_close(z, snap.value(0, {0, 0}), 1e-12)) << N << ' ' << R << ' ' << z;
      }
}

TEST(ChaosEnumeration, FirstOrderTruncation) {
  const Fixture f(4, 0.5, 2, 12);
  double s = 0;
  for (int n = 1; n <= 4; ++n)
    for (int x1 = -n; x1 <= n; ++x1)
      for (int x2 = -n; x2 <= n; ++x2) {
        const double q = rw_kernel_2d(n, {x1, x2});
        if (q > 0) s += q * f.plane.sample_eta(n, {x1, x2});
      }
  const double z1 = chaos_eval_Z(f.plane, f.sch, {4, 12, 1});
  EXPECT_TRUE(rel_close(z1, 1 + f.sch.sigma_N * s, 1e-13));
}

TEST(ChaosEnumeration, NoDisorder) {
  const auto law = DisorderLaw::gaussian();
  const auto sch = fixed_schedule(0.0, 5, law);
  const DisorderPlane p(1, 0, law, sch, 10);
  EXPECT_EQ(chaos_eval_Z(p, sch, {5, 10}), 1.0);
  EXPECT_EQ(record_decomposition_eval(p, sch, {5, 10}), 1.0);
  EXPECT_EQ(zdiff_eval(p, sch, 5, 3, 10), 1.0);
}

TEST(ChaosEnumeration, RejectsLargeN) {
  const Fixture f(9, 0.5, 0, 18);
  EXPECT_THROW(chaos_eval_Z(f.plane, f.sch, {9, 18}), BudgetError);
}

TEST(ChaosDP, OrderTruncationMatchesEnumeration) {
  for (int R : {2, 8})
    for (int K : {1, 2, 3, 7}) {
      const Fixture f(7, 0.6, 9, 8);
      const double e = chaos_eval_Z(f.plane, f.sch, {7, R, K});
      const double d = chaos_eval_Z(f.plane, f.sch, {7, R, K}, EvalMode::kDP);
      EXPECT_TRUE(rel_close(d, e, 1e-12)) << R << ' ' << K;
    }
}

TEST(ChaosDP, FullOrderIsTheForwardRecursion) {
  const Fixture f(40, 0.5, 1, 38);
  const double a = chaos_eval_Z(f.plane, f.sch, {40, 38, 40}, EvalMode::kDP);
  const double b = chaos_dp_orders(f.plane, 38, 40, 40);
  EXPECT_TRUE(rel_close(a, b, 1e-12));
}

TEST(RecordDecomposition, EqualsChaos) {
  for (int s = 0; s < 6; ++s)
    for (int N : {1, 2, 4, 6})
      for (int R : {2, 6}) {
        const Fixture f(N, s % 2 ? 0.3 : 0.5, std::uint32_t(s), 6);
        const double z = chaos_eval_Z(f.plane, f.sch, {N, R});
        const double r = record_decomposition_eval(f.plane, f.sch, {N, R});
        ASSERT_TRUE(rel_close(r, z, 1e-12)) << s << ' ' << N << ' ' << R;
      }
}

TEST(RecordDecomposition, RejectsLargeN) {
  const Fixture f(7, 0.5, 0, 7);
  EXPECT_THROW(record_decomposition_eval(f.plane, f.sch, {7, 7}), BudgetError);
}

TEST(XdomConstrained, SingleTimeBlocks) {
  const Fixture f(5, 0.5, 3, 6);
  const Site x{1, 0}, z{2, 1};
  const double v = xdom_constrained_eval(f.plane, f.sch, 1, 3, 3, x, z, z, 6);
  EXPECT_NEAR(v, f.sch.sigma_N * rw_kernel_2d(2, z - x) * f.plane.sample_eta(3, z), 1e-15);
  EXPECT_EQ(xdom_constrained_eval(f.plane, f.sch, 1, 3, 3, x, z, {0, 1}, 6), 0.0);
  EXPECT_EQ(xdom_constrained_eval(f.plane, f.sch, 0, 3, 5, {0, 0}, {1, 1}, {1, 1}, 6), 0.0);
}

TEST(XdomConstrained, MatchesSumOverPinnedChains) {
  // Summing the pinned pieces over every (b', z') recovers the dominated chaos
  // with first time b at site z.
  const Fixture f(6, 0.5, 5, 6);
  const int b = 2;
  const Site z{1, 1};
  double pinned = 0;
  for (int bp = b; bp <= 6; ++bp)
    for (int x1 = -6; x1 <= 6; ++x1)
      for (int x2 = -6; x2 <= 6; ++x2)
        pinned += xdom_constrained_eval(f.plane, f.sch, 0, b, bp, {0, 0}, z, {x1, x2}, 6);
  // Same quantity through the DP restricted to n_1 = b, minus the other sites at time b.
  double others = 0;
  for (int x1 = -2; x1 <= 2; ++x1)
    for (int x2 = -2; x2 <= 2; ++x2) {
      if (Site{x1, x2} == z) continue;
      for (int bp = b; bp <= 6; ++bp)
        for (int y1 = -6; y1 <= 6; ++y1)
          for (int y2 = -6; y2 <= 6; ++y2)
            others += xdom_constrained_eval(f.plane, f.sch, 0, b, bp, {0, 0}, {x1, x2}, {y1, y2}, 6);
    }
  EXPECT_TRUE(rel_close(pinned + others, dominated_sum(f.plane, 6, b, b, 6), 1e-12));
}

TEST(XdomDP, OneStepExample) {
  const Fixture f(1, 0.5, 8, 6);
  double s = 0;
  for (const Site& d : kNeighbours) s += f.plane.sample_eta(1, d);
  EXPECT_NEAR(xdom_eval(f.plane, f.sch, {1, 6}), f.sch.sigma_N / 4 * s, 1e-15);
}

TEST(XdomDP, MatchesEnumeration) {
  for (int N : {2, 5, 8})
    for (int R : {2, 3, 8}) {
      const Fixture f(N, 0.6, std::uint32_t(N + R), 8);
      const double e = xdom_enumerate(f.plane, R, 1, N, N);
      const double d = xdom_eval(f.plane, f.sch, {N, R});
      EXPECT_TRUE(rel_close(d, e, 1e-12)) << N << ' ' << R << ' ' << d << ' ' << e;
    }
}

TEST(XdomDP, RestrictedRangesMatchEnumeration) {
  const Fixture f(8, 0.7, 21, 8);
  for (auto [lo, hi, h] : {std::tuple{1, 1, 8}, {2, 3, 8}, {3, 5, 6}, {4, 8, 8}, {2, 2, 3}}) {
    const double e = xdom_enumerate(f.plane, 3, lo, hi, h);
    EXPECT_TRUE(rel_close(dominated_sum(f.plane, 3, lo, hi, h), e, 1e-12)) << lo << hi << h;
  }
}

TEST(XdomDP, BlocksAndProductForm) {
  const Fixture f(6, 0.5, 2, 6);
  const double x = xdom_eval(f.plane, f.sch, {6, 6});
  EXPECT_TRUE(rel_close(zdiff_eval(f.plane, f.sch, 6, 1, 6), 1 + x, 1e-13));
  EXPECT_EQ(xdom_block_eval(f.plane, f.sch, 6, 1, 1, 6).value, x);
  // M = 3 blocks of N = 6: [1, 1], [2, 3], [4, 6].
  double p = 1;
  for (int j = 1; j <= 3; ++j) {
    const auto blk = log_block(6, 3, j);
    const double v = xdom_block_eval(f.plane, f.sch, 6, 3, j, 6).value;
    EXPECT_TRUE(rel_close(v, xdom_enumerate(f.plane, 6, blk.first, blk.last, blk.last), 1e-12));
    p *= 1 + v;
  }
  EXPECT_TRUE(rel_close(zdiff_eval(f.plane, f.sch, 6, 3, 6), p, 1e-14));
  const Fixture big(300, 0.5, 0, 300);
  EXPECT_THROW(xdom_eval(big.plane, big.sch, {300, 104}), BudgetError);
}

TEST(XdomDP, EmptyBlockFlagged) {
  const Fixture f(4, 0.5, 0, 4);
  // 4^(1/8) and 4^(2/8) both floor to 1.
  const auto r = xdom_block_eval(f.plane, f.sch, 4, 8, 2, 4);
  EXPECT_TRUE(r.empty_block);
  EXPECT_EQ(r.value, 0.0);
}

TEST(LogBlocks, ExactBoundaries) {
  const int want512[] = {2, 4, 10, 22, 49, 107, 234, 512};
  int prev = 0;
  for (int j = 1; j <= 8; ++j) {
    const auto b = log_block(512, 8, j);
    EXPECT_EQ(b.last, want512[j - 1]) << j;
    EXPECT_EQ(b.first, prev + 1);
    prev = b.last;
  }
  // Perfect powers land exactly on the boundary.
  for (int j = 1; j <= 8; ++j) EXPECT_EQ(log_block(256, 8, j).last, 1 << j);
  EXPECT_EQ(floor_root_power(1000000, 3, 1), 100);
  EXPECT_EQ(floor_root_power(999999, 3, 1), 99);
  EXPECT_THROW(log_block(10, 2, 3), DomainError);
}

TEST(SecondMoments, SmallExamples) {
  const double s = 0.7, s2 = s * s;
  EXPECT_NEAR(second_moment_Z(1, s), 1 + s2 / 4, 1e-15);
  EXPECT_NEAR(second_moment_Z(2, s), 1 + s2 / 4 + 9 * s2 / 64 + s2 * s2 / 16, 1e-15);
  EXPECT_NEAR(second_moment_xdom(1, s), s2 / 4, 1e-15);
  EXPECT_EQ(second_moment_Z(0, s), 1.0);
}

TEST(SecondMoments, MatchSubsetEnumeration) {
  for (double s : {0.4, 0.9})
    for (int N : {3, 7, 12}) {
      EXPECT_TRUE(rel_close(second_moment_Z(N, s), brute_moment(N, s, false, 0, 0, 0), 1e-13));
      EXPECT_TRUE(rel_close(second_moment_xdom(N, s), brute_moment(N, s, true, 1, N, N), 1e-13));
      EXPECT_TRUE(rel_close(dominated_mass(2, 4, 9, s), brute_moment(N, s, true, 2, 4, 9), 1e-13));
    }
}

TEST(SecondMoments, GeometricBoundAndOrderMasses) {
  const auto sch = make_schedule(0.5, 512, DisorderLaw::gaussian());
  const double total = second_moment_Z(512, sch.sigma_N);
  const auto bound = second_moment_bound(512, sch.sigma_N);
  ASSERT_TRUE(bound.has_value());
  EXPECT_LE(total, *bound);
  const auto m = order_masses_Z(512, sch.sigma_N, 40);
  double s = 0;
  for (double v : m) s += v;
  const double x = sch.effective_strength();
  EXPECT_NEAR(s, total, std::pow(x, 41) / (1 - x) + 1e-12);
  for (int K = 1; K < 20; ++K) {
    double tail = 0;
    for (std::size_t k = std::size_t(K) + 1; k < m.size(); ++k) tail += m[k];
    EXPECT_LE(tail, std::pow(x, K + 1) / (1 - x)) << K;
  }
  EXPECT_FALSE(second_moment_bound(64, 2.0).has_value());
}

TEST(SecondMoments, BlockMassesAddUp) {
  const double s = make_schedule(0.5, 200, DisorderLaw::gaussian()).sigma_N;
  EXPECT_DOUBLE_EQ(second_moment_xdom_block(200, 1, 1, s), second_moment_xdom(200, s));
  double sum = 0;
  for (int j = 1; j <= 4; ++j) sum += second_moment_xdom_block(200, 4, j, s);
  EXPECT_LE(sum, second_moment_xdom(200, s));
}

TEST(LimitBlocks, ClosedForm) {
  EXPECT_NEAR(i_mj(0.5, 1, 1), std::log(4.0 / 3.0), 1e-15);
  EXPECT_NEAR(i_mj(0.5, 2, 1), std::log(8.0 / 7.0), 1e-15);
  for (int M : {1, 3, 8, 50}) {
    double s = 0;
    for (int j = 1; j <= M; ++j) s += i_mj(0.7, M, j);
    EXPECT_NEAR(s, -std::log(1 - 0.49), 1e-12);
  }
  EXPECT_THROW(i_mj(1.0, 2, 1), DomainError);
  EXPECT_THROW(i_mj(0.5, 2, 3), DomainError);
}

TEST(SingularMoment, LimitingCases) {
  const int N = 64;
  const auto psi = cube_average_psi(TestFunction::reference(), N);
  EXPECT_NEAR(singular_second_moment(psi, N, 1.3, 0.0, 0.4), 1.69 * psi.norm_sq(), 1e-14);
  EXPECT_NEAR(singular_second_moment(psi, N, 0.0, 1.0, 0.0), 0.0, 1e-18);
  const double full = singular_second_moment(psi, N, 0.0, 1.0, 0.4);
  EXPECT_GT(full, 0.0);
  EXPECT_LT(full, psi.norm_sq() * (second_moment_Z(N, 0.4) - 1));
}

TEST(XdomDP, VarianceMatchesMomentDP) {
  const int N = 16, S = 3000;
  const auto law = DisorderLaw::gaussian();
  const auto sch = make_schedule(0.5, N, law);
  const int R = policy_box_radius(N);
  double m1 = 0, m2 = 0, m4 = 0;
  for (int s = 0; s < S; ++s) {
    const DisorderPlane p(77, std::uint32_t(s), law, sch, R);
    const double x = xdom_eval(p, sch, {N, R});
    m1 += x;
    m2 += x * x;
    m4 += x * x * x * x;
  }
  m1 /= S;
  m2 /= S;
  m4 /= S;
  const double var = m2 - m1 * m1;
  const double se = std::sqrt((m4 - m2 * m2) / S);
  EXPECT_LT(std::abs(var - second_moment_xdom(N, sch.sigma_N)), 3 * se);
}

TEST(MomentCurve, CsvExport) {
  MomentCurve c{"z", {1, 2}, {1.25, 1.5}, {1.3, 1.75}};
  std::ostringstream os;
  c.write_csv(os);
  EXPECT_EQ(os.str(), "N,value,target,constraint\n1,1.25,1.3,z\n2,1.5,1.75,z\n");
}

}  // namespace
}  // namespace dpchaos
