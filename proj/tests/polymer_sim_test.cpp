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

#include "dpchaos/polymer_sim.hpp"

#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <map>
#include <set>
#include <sstream>

namespace dpchaos {

bool operator<(const Site& a, const Site& b) { return std::pair(a.x1, a.x2) < std::pair(b.x1, b.x2); }

namespace {

DisorderPlane make_plane(int N, double beta_hat, std::uint32_t sample, int R = -1,
                         std::uint64_t seed = 99) {
  const auto law = DisorderLaw::gaussian();
  const auto sch = make_schedule(beta_hat, N, law);
  return DisorderPlane(seed, sample, law, sch, R < 0 ? policy_box_radius(N) : R);
}

// Plain recursion over (x1, x2) with the box as an absorbing boundary.
std::map<std::pair<int, Site>, double> naive_field(const DisorderPlane& plane, int R) {
  auto key = [](int m, Site z) { return std::pair<int, Site>{m, z}; };
  std::map<std::pair<int, Site>, double> z;
  const int N = plane.horizon();
  auto get = [&](int m, Site s) { return s.linf() > R ? 1.0 : z.at(key(m, s)); };
  for (int x1 = -R; x1 <= R; ++x1)
    for (int x2 = -R; x2 <= R; ++x2) z[key(N, {x1, x2})] = 1.0;
  for (int m = N; m >= 1; --m)
    for (int x1 = -R; x1 <= R; ++x1)
      for (int x2 = -R; x2 <= R; ++x2) {
        double s = 0;
        for (const Site& d : kNeighbours) {
          const Site y{x1 + d.x1, x2 + d.x2};
          s += (y.linf() > R ? 1.0 : plane.sample_weight(m, y)) * get(m, y);
        }
        z[key(m - 1, {x1, x2})] = 0.25 * s;
      }
  return z;
}

TEST(BoxGeometry, CellsRoundTripAndColumnsMatchBox) {
  for (int p : {0, 1})
    for (int R : {1, 2, 5}) {
      const BoxGeometry g(R, p);
      for (int m = 0; m <= 9; ++m) {
        std::set<std::pair<int, int>> seen;
        auto [r0, r1] = g.rows(m);
        for (int a = 0; a < g.width(); ++a) {
          auto [lo, hi] = g.cols(m, a);
          for (int b = 0; b < g.width(); ++b) {
            const Site s = g.site_at(m, a, b);
            const bool in = a >= r0 && a <= r1 && b >= lo && b <= hi;
            ASSERT_EQ(in, g.contains(s)) << p << ' ' << R << ' ' << m << ' ' << a << ' ' << b;
            ASSERT_TRUE(g.on_sublattice(m, s));
            if (in) {
              ASSERT_EQ(g.cell(m, s), std::pair(a, b));
              seen.insert({s.x1, s.x2});
            }
          }
        }
        // Every box site of the sublattice is stored exactly once.
        int count = 0;
        for (int x1 = -R; x1 <= R; ++x1)
          for (int x2 = -R; x2 <= R; ++x2)
            if (g.on_sublattice(m, {x1, x2})) {
              ++count;
              ASSERT_TRUE(seen.count({x1, x2}));
            }
        ASSERT_EQ(count, int(seen.size()));
      }
    }
}

TEST(BoxGeometry, SameCellSameSiteTwoStepsApart) {
  const BoxGeometry g(4, 1);
  for (int m = 2; m < 12; ++m)
    for (int a = 0; a < g.width(); ++a)
      for (int b = 0; b < g.width(); ++b) ASSERT_EQ(g.site_at(m, a, b), g.site_at(m - 2, a, b));
}

TEST(EvolvePartition, OneStepExample) {
  const auto plane = make_plane(1, 0.5, 0);
  const auto snap = evolve_partition(plane, plane.schedule(), plane.box_radius());
  double s = 0;
  for (const Site& d : kNeighbours) s += plane.sample_eta(1, d);
  EXPECT_NEAR(snap.value(0, {0, 0}), 1 + plane.schedule().sigma_N / 4 * s, 1e-15);
  EXPECT_EQ(snap.value(1, {3, 4}), 1.0);
}

TEST(EvolvePartition, NoDisorderGivesOnes) {
  const auto law = DisorderLaw::gaussian();
  const auto sch = fixed_schedule(0.0, 20, law);
  const DisorderPlane plane(5, 0, law, sch, 30);
  const auto snap = evolve_partition(plane, sch, 30);
  for (int m = 0; m <= 20; m += 3)
    for (int x = -30; x <= 30; x += 7) EXPECT_EQ(snap.value(m, {x, -x / 2}), 1.0);
}

TEST(EvolvePartition, MatchesPlainRecursionBothSublattices) {
  for (int R : {2, 3}) {
    const auto plane = make_plane(5, 0.5, 7, R);
    const auto snap = evolve_partition(plane, plane.schedule(), R, 0.5);
    const auto ref = naive_field(plane, R);
    for (const auto& [k, v] : ref) ASSERT_NEAR(snap.value(k.first, k.second), v, 1e-13 * v);
  }
}

TEST(EvolvePartition, ForwardConeAgreesWithBackwardSweep) {
  for (int R : {3, 6, 40}) {
    const auto plane = make_plane(30, 0.8, 3, 40);
    const auto snap = evolve_partition(plane, plane.schedule(), R, 0.5);
    const double z = snap.value(0, {0, 0});
    EXPECT_NEAR(partition_at_origin(plane, R), z, 1e-12 * z) << R;
  }
}

TEST(EvolvePartition, Deterministic) {
  const auto p1 = make_plane(12, 0.5, 4);
  const auto p2 = make_plane(12, 0.5, 4);
  const auto a = evolve_partition(p1, p1.schedule(), p1.box_radius());
  const auto b = evolve_partition(p2, p2.schedule(), p2.box_radius());
  for (int m = 0; m <= 12; ++m)
    for (int x1 = -5; x1 <= 5; ++x1) ASSERT_EQ(a.value(m, {x1, 2}), b.value(m, {x1, 2}));
  EXPECT_NE(a.value(0, {0, 0}), evolve_partition(make_plane(12, 0.5, 5), p1.schedule(), 21).value(0, {0, 0}));
}

TEST(EvolvePartition, PolicyAndBudgetErrors) {
  const auto plane = make_plane(16, 0.5, 0);
  EXPECT_THROW(evolve_partition(plane, plane.schedule(), 23), DomainError);
  EXPECT_THROW(evolve_partition(plane, plane.schedule(), 24, kDefaultCBox, 1000), BudgetError);
  const auto other = make_schedule(0.3, 16, DisorderLaw::gaussian());
  EXPECT_THROW(evolve_partition(plane, other, 24), DomainError);
}

TEST(EvolvePartition, FieldIsPositiveAndSliceExports) {
  const auto plane = make_plane(10, 0.9, 1);
  const auto snap = evolve_partition(plane, plane.schedule(), plane.box_radius());
  for (int m = 0; m <= 10; ++m)
    for (int x1 = -19; x1 <= 19; ++x1)
      for (int x2 = -19; x2 <= 19; ++x2) ASSERT_GT(snap.value(m, {x1, x2}), 0.0);
  std::ostringstream os;
  snap.write_slice_csv(os, 3);
  const std::string s = os.str();
  EXPECT_EQ(s.substr(0, 11), "m,x1,x2,Z\n3");
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 1 + 39 * 39);
}

TEST(PartitionAtOrigin, MartingaleMean) {
  const int S = 600;
  double m1 = 0, m2 = 0;
  for (int s = 0; s < S; ++s) {
    const auto plane = make_plane(64, 0.5, std::uint32_t(s));
    const double z = partition_at_origin(plane, plane.box_radius());
    m1 += z;
    m2 += z * z;
  }
  m1 /= S;
  const double se = std::sqrt((m2 / S - m1 * m1) / S);
  EXPECT_LT(std::abs(m1 - 1), 4 * se);
}

TEST(TestFunction, NormMatchesIndependentQuadrature) {
  const TestFunction psi(0.4, 0.3, {0.1, -0.2}, 0.6, 1.7);
  using boost::math::quadrature::gauss_kronrod;
  // Integrate over t and the radial distance s = |x - x0| in the plane.
  auto inner = [&](double t) {
    return gauss_kronrod<double, 61>::integrate(
        [&](double s) { const double v = psi(t, 0.1 + s, -0.2); return 2 * kPi * s * v * v; }, 0.0,
        0.6, 15, 1e-14);
  };
  const double ref = gauss_kronrod<double, 61>::integrate(inner, 0.1, 0.7, 15, 1e-14);
  EXPECT_NEAR(psi.l2_norm_sq(), ref, 1e-8 * ref);
  EXPECT_EQ(psi(0.0, 0.1, -0.2), 0.0);
  EXPECT_EQ(psi(0.4, 0.7, -0.2), 0.0);
  EXPECT_NEAR(psi(0.4, 0.1, -0.2), 1.7 * std::exp(-1.0), 1e-15);
  EXPECT_THROW(TestFunction(0.1, 0.2, {0, 0}, 0.5), DomainError);
}

TEST(CubeAverage, ConstantAndEmptyRegions) {
  const int N = 64;
  const auto one = cube_average([](double, double, double) { return 1.0; },
                                SupportBox{0.2, 0.5, -0.5, 0.5, -0.25, 0.75}, N);
  for (int n = 14; n <= 32; ++n)
    for (int z1 = -3; z1 <= 4; ++z1) EXPECT_NEAR(one.at(n, {z1, 0}), 1.0, 1e-14);
  EXPECT_EQ(one.at(40, {0, 0}), 0.0);
  EXPECT_EQ(one.at(20, {9, 0}), 0.0);
  const auto psi = cube_average_psi(TestFunction::reference(), N);
  EXPECT_EQ(psi.at(N, {0, 0}), 0.0);
  EXPECT_EQ(psi.at(5, {0, 0}), 0.0);
  EXPECT_GT(psi.at(22, {0, 0}), 0.0);
}

TEST(CubeAverage, RiemannSumConverges) {
  const auto psi = TestFunction::reference();
  const auto tab = cube_average_psi(psi, 4096, 2);
  EXPECT_NEAR(tab.norm_sq(), psi.l2_norm_sq(), 0.01 * psi.l2_norm_sq());
}

TEST(Pairings, TrivialCases) {
  const auto law = DisorderLaw::gaussian();
  const auto sch = fixed_schedule(0.0, 16, law);
  const DisorderPlane plane(5, 0, law, sch, 24);
  const auto snap = evolve_partition(plane, sch, 24);
  const auto psi = cube_average_psi(TestFunction::reference(), 16);
  EXPECT_EQ(pair_V(snap, psi), 0.0);
  EXPECT_EQ(pair_Xi(snap, plane, psi), 0.0);
  const auto p2 = make_plane(16, 0.5, 0);
  EXPECT_EQ(pair_white_noise(p2, PsiTable(16, 1, 0, 0, 0, 0, 0), 16), 0.0);
  EXPECT_THROW(pair_Xi(snap, p2, psi), DomainError);
}

TEST(Pairings, StreamingMatchesSnapshot) {
  const int N = 36;
  const auto plane = make_plane(N, 0.7, 11);
  const auto snap = evolve_partition(plane, plane.schedule(), plane.box_radius());
  const auto psi = cube_average_psi(TestFunction::reference(), N);
  const auto r = stream_sample(plane, plane.box_radius(), &psi);
  auto close = [](double a, double b) { return std::abs(a - b) <= 1e-12 * (std::abs(b) + 1e-3); };
  EXPECT_TRUE(close(r.v, pair_V(snap, psi))) << r.v;
  EXPECT_TRUE(close(r.xi, pair_Xi(snap, plane, psi))) << r.xi;
  EXPECT_TRUE(close(r.white, pair_white_noise(plane, psi, N))) << r.white;
  EXPECT_TRUE(close(r.log_sum, pair_H(snap, psi, 0.0))) << r.log_sum;
  EXPECT_EQ(r.z00, snap.value(0, {0, 0}));
  EXPECT_NEAR(partition_at_origin(plane, plane.box_radius()), r.z00, 1e-12 * r.z00);
}

TEST(Pairings, WhiteNoiseVarianceMatchesExact) {
  const int N = 64, S = 3000;
  const auto psi = cube_average_psi(TestFunction::reference(), N);
  double m1 = 0, m2 = 0, m4 = 0;
  for (int s = 0; s < S; ++s) {
    const double w = pair_white_noise(make_plane(N, 0.5, std::uint32_t(s)), psi, N);
    m1 += w;
    m2 += w * w;
    m4 += w * w * w * w;
  }
  m1 /= S;
  m2 /= S;
  m4 /= S;
  const double var = m2 - m1 * m1, se = std::sqrt((m4 - m2 * m2) / S);
  EXPECT_LT(std::abs(var - psi.norm_sq()), 3 * se);
}

TEST(Pairings, LeaveOneOutCentring) {
  const auto h = centred_h({1.0, 2.0, 6.0});
  EXPECT_DOUBLE_EQ(h[0], 1.0 - 4.0);
  EXPECT_DOUBLE_EQ(h[1], 2.0 - 3.5);
  EXPECT_DOUBLE_EQ(h[2], 6.0 - 1.5);
  EXPECT_THROW(centred_h({1.0}), DomainError);
}

}  // namespace
}  // namespace dpchaos
