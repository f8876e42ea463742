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

// Partition-function fields of the lattice polymer and their pairings with
// smooth test functions.
//
// Z(m, z) solves the backward recursion
//
//   Z(N, .) = 1,   Z(m - 1, z) = 1/4 sum_{z' ~ z} w(m, z') Z(m, z'),
//
// with w = exp(beta omega - lambda) = 1 + sigma eta. The sup-norm box of
// radius R is absorbing: outside it Z = 1 and eta = 0.

#ifndef DPCHAOS_POLYMER_SIM_HPP
#define DPCHAOS_POLYMER_SIM_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "dpchaos/common.hpp"
#include "dpchaos/disorder.hpp"
#include "dpchaos/lattice.hpp"

namespace dpchaos {

inline constexpr double kDefaultCBox = 6.0;
inline constexpr std::size_t kDefaultMemoryBudget = std::size_t(1) << 30;

inline int policy_box_radius(int N, double c_box = kDefaultCBox) {
  if (N < 1) throw DomainError("horizon must be >= 1");
  if (!(c_box > 0)) throw DomainError("C_box must be positive");
  return scaled_radius(c_box, N);
}

inline void check_box_policy(int N, int box_radius, double c_box = kDefaultCBox) {
  if (box_radius < policy_box_radius(N, c_box))
    throw DomainError("box radius " + std::to_string(box_radius) + " below ceil(C_box sqrt(N)) = " +
                      std::to_string(policy_box_radius(N, c_box)));
}

/// One time slice of a sweep on one sublattice.
struct SliceView {
  int m;
  const BoxGeometry& geo;
  const BoxField& z;
  const BoxField* w;  // nullptr at m = 0

  /// Z(m, s); s must lie on the sublattice. 1 outside the box.
  double value(Site s) const {
    if (!geo.contains(s)) return 1.0;
    auto [a, b] = geo.cell(m, s);
    return z.at(a, b);
  }
  /// w(m, s); 1 outside the box.
  double weight(Site s) const {
    if (!geo.contains(s) || w == nullptr) return 1.0;
    auto [a, b] = geo.cell(m, s);
    return w->at(a, b);
  }
};

namespace detail {

inline void fill_slice_weights(const DisorderPlane& plane, const BoxGeometry& g, int m,
                               BoxField& w) {
  const int o = g.origin(m);
  auto [r0, r1] = g.rows(m);
  for (int a = r0; a <= r1; ++a) {
    auto [lo, hi] = g.cols(m, a);
    if (lo > hi) continue;
    plane.fill_weights(m, g.site(m, a + o, lo + o), {1, -1}, hi - lo + 1, w.row(a) + lo);
  }
}

inline void multiply_in_box(const BoxGeometry& g, int m, const BoxField& z, BoxField& w) {
  auto [r0, r1] = g.rows(m);
  for (int a = r0; a <= r1; ++a) {
    auto [lo, hi] = g.cols(m, a);
    const double* zr = z.row(a);
    double* wr = w.row(a);
    for (int b = lo; b <= hi; ++b) wr[b] *= zr[b];
  }
}

}  // namespace detail

/// Backward sweep on one sublattice from time N down to m_stop >= 0, box
/// radius R <= plane.box_radius(). Calls visit(const SliceView&) once per
/// time slice, from m = N downwards.
template <class Visitor>
void backward_sweep(const DisorderPlane& plane, int box_radius, int parity, int m_stop,
                    Visitor&& visit) {
  const int N = plane.horizon();
  if (box_radius > plane.box_radius()) throw DomainError("box exceeds the disorder plane");
  if (m_stop < 0 || m_stop > N) throw DomainError("m_stop out of range");
  const BoxGeometry g(box_radius, parity);
  std::array<BoxField, 2> z{BoxField(g, 1.0), BoxField(g, 1.0)};
  std::array<BoxField, 2> w{BoxField(g, 1.0), BoxField(g, 1.0)};
  for (int m = N; m >= m_stop; --m) {
    BoxField& zm = z[m & 1];
    if (m == 0) {
      visit(SliceView{m, g, zm, nullptr});
      break;
    }
    BoxField& wm = w[m & 1];
    detail::fill_slice_weights(plane, g, m, wm);
    visit(SliceView{m, g, zm, &wm});
    if (m == m_stop) break;
    detail::multiply_in_box(g, m, zm, wm);
    backward_average(g, m, wm, z[(m - 1) & 1]);
  }
}

/// Z(0, 0) by the forward recursion on the light cone of the origin, with the
/// mass leaving the box collected at its exit time.
inline double partition_at_origin(const DisorderPlane& plane, int box_radius) {
  const int N = plane.horizon();
  if (box_radius > plane.box_radius()) throw DomainError("box exceeds the disorder plane");
  const BoxGeometry g(box_radius, 0);
  std::array<BoxField, 2> mu{BoxField(g, 0.0), BoxField(g, 0.0)};
  {
    auto [a, b] = g.cell(0, {0, 0});
    mu[0].at(a, b) = 1.0;
  }
  std::vector<double> wrow(std::size_t(g.width()) + 8);
  CompensatedSum escaped;
  double mass = 1.0;
  for (int m = 1; m <= N; ++m) {
    const BoxField& old = mu[(m - 1) & 1];
    BoxField& next = mu[m & 1];
    const int o = g.origin(m);
    // The cone 0 <= i, j <= m in rotated coordinates.
    const int c_lo = -o, c_hi = m - o;
    const int a_lo = std::max(0, c_lo), a_hi = std::min(g.rows(m).second, c_hi);
    forward_average(g, m, old, next, a_lo, a_hi, c_lo, c_hi);
    CompensatedSum inside, weighted;
    for (int a = a_lo; a <= a_hi; ++a) {
      auto [lo, hi] = g.cols(m, a);
      lo = std::max(lo, c_lo);
      hi = std::min(hi, c_hi);
      if (lo > hi) continue;
      plane.fill_weights(m, g.site(m, a + o, lo + o), {1, -1}, hi - lo + 1, wrow.data());
      double* r = next.row(a);
      double s_in = 0, s_w = 0;
      for (int b = lo; b <= hi; ++b) {
        s_in += r[b];
        r[b] *= wrow[std::size_t(b - lo)];
        s_w += r[b];
      }
      inside.add(s_in);
      weighted.add(s_w);
    }
    escaped.add(mass - inside.value());
    mass = weighted.value();
  }
  escaped.add(mass);
  return escaped.value();
}

/// The whole space-time field Z(m, z), 0 <= m <= N, |z|_inf <= R, both sublattices.
class FieldSnapshot {
 public:
  int horizon() const { return N_; }
  int box_radius() const { return R_; }
  std::uint64_t master_seed() const { return seed_; }
  std::uint32_t sample_index() const { return sample_; }
  const CouplingSchedule& schedule() const { return sched_; }

  /// Z(m, z); 1 outside the box.
  double value(int m, Site z) const {
    if (m < 0 || m > N_) throw DomainError("snapshot time out of range");
    if (z.linf() > R_) return 1.0;
    const int p = (m + z.x1 + z.x2) & 1;
    auto [a, b] = geo_[p].cell(m, z);
    return fields_[std::size_t(p)][std::size_t(m)].at(a, b);
  }

  /// True if the snapshot was evolved from `plane`.
  bool matches(const DisorderPlane& plane) const {
    return plane.master_seed() == seed_ && plane.sample_index() == sample_ &&
           plane.horizon() == N_ && plane.schedule().beta_N == sched_.beta_N;
  }

  std::size_t bytes() const {
    std::size_t s = 0;
    for (const auto& per : fields_)
      for (const auto& f : per) s += f.bytes();
    return s;
  }

  /// CSV rows "m,x1,x2,Z" for every box site at time m.
  void write_slice_csv(std::ostream& os, int m) const {
    os << "m,x1,x2,Z\n";
    os.precision(17);
    for (int x1 = -R_; x1 <= R_; ++x1)
      for (int x2 = -R_; x2 <= R_; ++x2) os << m << ',' << x1 << ',' << x2 << ',' << value(m, {x1, x2}) << '\n';
  }

 private:
  friend FieldSnapshot evolve_partition(const DisorderPlane&, const CouplingSchedule&, int, double,
                                        std::size_t);
  int N_ = 0;
  int R_ = 0;
  std::uint64_t seed_ = 0;
  std::uint32_t sample_ = 0;
  CouplingSchedule sched_{};
  std::vector<BoxGeometry> geo_;
  std::array<std::vector<BoxField>, 2> fields_;
};

inline std::size_t snapshot_bytes(int N, int box_radius) {
  const BoxField f(BoxGeometry(box_radius), 1.0);
  return 2 * std::size_t(N + 1) * f.bytes();
}

/// Evolves the full field by one backward sweep per sublattice.
inline FieldSnapshot evolve_partition(const DisorderPlane& plane, const CouplingSchedule& schedule,
                                      int box_radius, double c_box = kDefaultCBox,
                                      std::size_t memory_budget = kDefaultMemoryBudget) {
  if (schedule.N != plane.horizon() || schedule.beta_N != plane.schedule().beta_N)
    throw DomainError("schedule does not match the disorder plane");
  check_box_policy(schedule.N, box_radius, c_box);
  const std::size_t need = snapshot_bytes(schedule.N, box_radius);
  if (need > memory_budget)
    throw BudgetError("snapshot needs " + std::to_string(need) + " bytes, budget " +
                      std::to_string(memory_budget));
  FieldSnapshot s;
  s.N_ = schedule.N;
  s.R_ = box_radius;
  s.seed_ = plane.master_seed();
  s.sample_ = plane.sample_index();
  s.sched_ = schedule;
  for (int p = 0; p < 2; ++p) {
    s.geo_.emplace_back(box_radius, p);
    auto& per = s.fields_[std::size_t(p)];
    per.resize(std::size_t(schedule.N) + 1);
    backward_sweep(plane, box_radius, p, 0,
                   [&](const SliceView& v) { per[std::size_t(v.m)] = v.z; });
  }
  return s;
}

// ---------------------------------------------------------------------------
// Test functions

/// Space-time bump psi(t, x) = A phi(r), r^2 = ((t - t0)/tau)^2 + |x - x0|^2/rho^2,
/// phi(r) = exp(-1/(1 - r^2)) for r < 1 and 0 otherwise.
class TestFunction {
 public:
  TestFunction(double t0, double tau, Vec2 x0, double rho, double amplitude = 1.0)
      : t0_(t0), tau_(tau), x0_(x0), rho_(rho), amp_(amplitude) {
    if (!(tau > 0) || !(rho > 0)) throw DomainError("bump widths must be positive");
    if (t0 - tau < 0 || t0 + tau > 1) throw DomainError("bump must be supported in [0, 1]");
    // ||psi||^2 = A^2 tau rho^2 4 pi int_0^1 phi(r)^2 r^2 dr.
    boost::math::quadrature::tanh_sinh<double> q;
    const double radial = q.integrate(
        [](double r) { return r >= 1 ? 0.0 : std::exp(-2.0 / (1.0 - r * r)) * r * r; }, 0.0, 1.0);
    l2_ = amp_ * amp_ * tau_ * rho_ * rho_ * 4 * kPi * radial;
  }

  /// The reference bump used by the acceptance runs.
  static TestFunction reference() { return TestFunction(0.35, 0.25, {0.0, 0.0}, 0.5, 1.0); }

  double operator()(double t, double x1, double x2) const {
    const double dt = (t - t0_) / tau_, d1 = (x1 - x0_.x1) / rho_, d2 = (x2 - x0_.x2) / rho_;
    const double r2 = dt * dt + d1 * d1 + d2 * d2;
    return r2 >= 1 ? 0.0 : amp_ * std::exp(-1.0 / (1.0 - r2));
  }

  double l2_norm_sq() const { return l2_; }
  double t0() const { return t0_; }
  double tau() const { return tau_; }
  Vec2 x0() const { return x0_; }
  double rho() const { return rho_; }
  double amplitude() const { return amp_; }

  double t_lo() const { return t0_ - tau_; }
  double t_hi() const { return t0_ + tau_; }

 private:
  double t0_, tau_;
  Vec2 x0_;
  double rho_, amp_;
  double l2_;
};

/// Cube averages psibar(n, z) on a dense table over the support.
class PsiTable {
 public:
  PsiTable() = default;
  PsiTable(int N, int n_lo, int n_hi, int z1_lo, int z1_hi, int z2_lo, int z2_hi)
      : N_(N), n_lo_(n_lo), n_hi_(n_hi), z1_lo_(z1_lo), z1_hi_(z1_hi), z2_lo_(z2_lo),
        z2_hi_(z2_hi) {
    if (!empty())
      v_.assign(std::size_t(n_hi - n_lo + 1) * std::size_t(z1_hi - z1_lo + 1) *
                    std::size_t(z2_hi - z2_lo + 1),
                0.0);
  }

  int horizon() const { return N_; }
  bool empty() const { return n_lo_ > n_hi_ || z1_lo_ > z1_hi_ || z2_lo_ > z2_hi_; }
  int n_lo() const { return n_lo_; }
  int n_hi() const { return n_hi_; }
  int z1_lo() const { return z1_lo_; }
  int z1_hi() const { return z1_hi_; }
  int z2_lo() const { return z2_lo_; }
  int z2_hi() const { return z2_hi_; }
  /// Largest |z|_inf in the support.
  int reach() const {
    return std::max({std::abs(z1_lo_), std::abs(z1_hi_), std::abs(z2_lo_), std::abs(z2_hi_)});
  }

  double at(int n, Site z) const {
    if (empty() || n < n_lo_ || n > n_hi_ || z.x1 < z1_lo_ || z.x1 > z1_hi_ || z.x2 < z2_lo_ ||
        z.x2 > z2_hi_)
      return 0.0;
    return v_[index(n, z)];
  }
  double& ref(int n, Site z) { return v_[index(n, z)]; }

  /// Calls f(Site, value) for the nonzero entries of slice n.
  template <class F>
  void for_each(int n, F&& f) const {
    if (empty() || n < n_lo_ || n > n_hi_) return;
    for (int x1 = z1_lo_; x1 <= z1_hi_; ++x1)
      for (int x2 = z2_lo_; x2 <= z2_hi_; ++x2) {
        const double v = v_[index(n, {x1, x2})];
        if (v != 0) f(Site{x1, x2}, v);
      }
  }

  /// (1/N^2) sum psibar^2.
  double norm_sq() const {
    CompensatedSum s;
    for (double v : v_) s.add(v * v);
    return s.value() / (double(N_) * N_);
  }

 private:
  std::size_t index(int n, Site z) const {
    return (std::size_t(n - n_lo_) * std::size_t(z1_hi_ - z1_lo_ + 1) + std::size_t(z.x1 - z1_lo_)) *
               std::size_t(z2_hi_ - z2_lo_ + 1) +
           std::size_t(z.x2 - z2_lo_);
  }

  int N_ = 0;
  int n_lo_ = 1, n_hi_ = 0, z1_lo_ = 1, z1_hi_ = 0, z2_lo_ = 1, z2_hi_ = 0;
  std::vector<double> v_;
};

namespace detail {

/// Gauss-Legendre nodes and weights on [0, 1].
inline std::pair<std::vector<double>, std::vector<double>> unit_gauss_rule(int order) {
  std::vector<double> x, w;
  auto take = [&](const auto& ab, const auto& wt, int n) {
    for (std::size_t k = 0; k < ab.size(); ++k) {
      const bool zero = (n % 2 == 1) && k == 0;
      x.push_back(0.5 + 0.5 * ab[k]);
      w.push_back(0.5 * wt[k]);
      if (!zero) {
        x.push_back(0.5 - 0.5 * ab[k]);
        w.push_back(0.5 * wt[k]);
      }
    }
  };
  using boost::math::quadrature::gauss;
  switch (order) {
    case 1: x = {0.5}; w = {1.0}; break;
    case 2: take(gauss<double, 2>::abscissa(), gauss<double, 2>::weights(), 2); break;
    case 3: take(gauss<double, 3>::abscissa(), gauss<double, 3>::weights(), 3); break;
    case 4: take(gauss<double, 4>::abscissa(), gauss<double, 4>::weights(), 4); break;
    case 5: take(gauss<double, 5>::abscissa(), gauss<double, 5>::weights(), 5); break;
    case 6: take(gauss<double, 6>::abscissa(), gauss<double, 6>::weights(), 6); break;
    default: throw DomainError("quadrature order must be in 1..6");
  }
  return {x, w};
}

}  // namespace detail

/// Support of a function of (t, x) in macroscopic units.
struct SupportBox {
  double t_lo, t_hi, x1_lo, x1_hi, x2_lo, x2_hi;
};

/// psibar(n, z) = integral of f(t/N, x/sqrt N) over (n-1, n] x (z1-1, z1] x (z2-1, z2],
/// by product Gauss-Legendre quadrature of the given order per cube.
template <class F>
PsiTable cube_average(F&& f, const SupportBox& box, int N, int order = 3) {
  if (N < 1) throw DomainError("horizon must be >= 1");
  const double sq = std::sqrt(double(N));
  const int n_lo = std::max(1, int(std::floor(box.t_lo * N)) + 1);
  const int n_hi = std::min(N, int(std::ceil(box.t_hi * N)));
  const int z1_lo = int(std::floor(box.x1_lo * sq)) + 1, z1_hi = int(std::ceil(box.x1_hi * sq));
  const int z2_lo = int(std::floor(box.x2_lo * sq)) + 1, z2_hi = int(std::ceil(box.x2_hi * sq));
  PsiTable tab(N, n_lo, n_hi, z1_lo, z1_hi, z2_lo, z2_hi);
  if (tab.empty()) return tab;
  const auto [x, w] = detail::unit_gauss_rule(order);
  const std::size_t q = x.size();
  for (int n = n_lo; n <= n_hi; ++n)
    for (int z1 = z1_lo; z1 <= z1_hi; ++z1)
      for (int z2 = z2_lo; z2 <= z2_hi; ++z2) {
        double s = 0;
        for (std::size_t a = 0; a < q; ++a) {
          const double t = (n - 1 + x[a]) / N;
          for (std::size_t b = 0; b < q; ++b) {
            const double y1 = (z1 - 1 + x[b]) / sq;
            for (std::size_t c = 0; c < q; ++c)
              s += w[a] * w[b] * w[c] * f(t, y1, (z2 - 1 + x[c]) / sq);
          }
        }
        tab.ref(n, {z1, z2}) = s;
      }
  return tab;
}

inline PsiTable cube_average_psi(const TestFunction& psi, int N, int order = 3) {
  const SupportBox box{psi.t_lo(), psi.t_hi(), psi.x0().x1 - psi.rho(), psi.x0().x1 + psi.rho(),
                       psi.x0().x2 - psi.rho(), psi.x0().x2 + psi.rho()};
  return cube_average(psi, box, N, order);
}

// ---------------------------------------------------------------------------
// Pairings

/// (1/N) sum psibar(n, z) eta(n, z).
inline double pair_white_noise(const DisorderPlane& plane, const PsiTable& psi, int N) {
  if (plane.horizon() < N) throw DomainError("plane horizon below N");
  if (psi.horizon() != N) throw DomainError("psi table built for a different N");
  CompensatedSum s;
  for (int n = psi.n_lo(); n <= psi.n_hi(); ++n)
    psi.for_each(n, [&](Site z, double v) {
      if (plane.in_domain(n, z)) s.add(v * plane.sample_eta(n, z));
    });
  return s.value() / N;
}

inline void check_snapshot(const FieldSnapshot& snap, const PsiTable& psi) {
  if (psi.horizon() != snap.horizon()) throw DomainError("psi table built for a different N");
}

/// (1/(beta_N N^2)) sum psibar (Z - 1).
inline double pair_V(const FieldSnapshot& snap, const PsiTable& psi) {
  check_snapshot(snap, psi);
  const double bN = snap.schedule().beta_N;
  if (bN == 0) return 0.0;
  CompensatedSum s;
  for (int n = psi.n_lo(); n <= psi.n_hi(); ++n)
    psi.for_each(n, [&](Site z, double v) { s.add(v * (snap.value(n, z) - 1.0)); });
  const double N = snap.horizon();
  return s.value() / (bN * N * N);
}

/// (1/(beta_N N^2)) sum psibar (log Z - c(n)), c(n) given per time slice
/// (centering[n], n = 0..N).
inline double pair_H(const FieldSnapshot& snap, const PsiTable& psi,
                     const std::vector<double>& centering) {
  check_snapshot(snap, psi);
  if (centering.size() != std::size_t(snap.horizon()) + 1)
    throw DomainError("centering needs one value per time slice");
  const double bN = snap.schedule().beta_N;
  if (bN == 0) return 0.0;
  CompensatedSum s;
  for (int n = psi.n_lo(); n <= psi.n_hi(); ++n)
    psi.for_each(n, [&](Site z, double v) {
      s.add(v * (std::log(snap.value(n, z)) - centering[std::size_t(n)]));
    });
  const double N = snap.horizon();
  return s.value() / (bN * N * N);
}

inline double pair_H(const FieldSnapshot& snap, const PsiTable& psi, double centering) {
  return pair_H(snap, psi, std::vector<double>(std::size_t(snap.horizon()) + 1, centering));
}

/// (1/N) sum psibar eta (Z - 1).
inline double pair_Xi(const FieldSnapshot& snap, const DisorderPlane& plane, const PsiTable& psi) {
  check_snapshot(snap, psi);
  if (!snap.matches(plane)) throw DomainError("snapshot and plane identifiers differ");
  CompensatedSum s;
  for (int n = psi.n_lo(); n <= psi.n_hi(); ++n)
    psi.for_each(n, [&](Site z, double v) {
      if (plane.in_domain(n, z)) s.add(v * plane.sample_eta(n, z) * (snap.value(n, z) - 1.0));
    });
  return s.value() / snap.horizon();
}

/// Everything one disorder sample contributes to a batch.
struct SampleRecord {
  std::uint64_t seed = 0;
  std::uint32_t sample_index = 0;
  double z00 = 1;      // Z(0, 0)
  double white = 0;    // pair_white_noise
  double v = 0;        // pair_V
  double xi = 0;       // pair_Xi
  double log_sum = 0;  // (1/(beta_N N^2)) sum psibar log Z, uncentred
};

/// One sample with the field streamed slice by slice: a full sweep of the
/// even sublattice (which carries Z(0, 0)) and, if psi is nonempty, a sweep of
/// the odd sublattice down to the first slice of psi.
inline SampleRecord stream_sample(const DisorderPlane& plane, int box_radius, const PsiTable* psi) {
  const int N = plane.horizon();
  SampleRecord r;
  r.seed = plane.master_seed();
  r.sample_index = plane.sample_index();
  const bool pairs = psi != nullptr && !psi->empty();
  if (pairs && psi->horizon() != N) throw DomainError("psi table built for a different N");
  const double sigma = plane.schedule().sigma_N;
  CompensatedSum white, vsum, xisum, lsum;
  auto visit = [&](const SliceView& s) {
    if (s.m == 0 && s.geo.parity() == 0) {
      auto [a, b] = s.geo.cell(0, {0, 0});
      r.z00 = s.z.at(a, b);
    }
    if (!pairs || s.m < psi->n_lo() || s.m > psi->n_hi()) return;
    psi->for_each(s.m, [&](Site z, double v) {
      if (!s.geo.on_sublattice(s.m, z)) return;
      const double zv = s.value(z);
      const double eta = sigma == 0 ? 0.0 : (s.weight(z) - 1.0) / sigma;
      white.add(v * eta);
      vsum.add(v * (zv - 1.0));
      xisum.add(v * eta * (zv - 1.0));
      lsum.add(v * std::log(zv));
    });
  };
  backward_sweep(plane, box_radius, 0, 0, visit);
  if (pairs) backward_sweep(plane, box_radius, 1, std::max(psi->n_lo(), 1), visit);
  if (pairs) {
    const double dN = N, bN = plane.schedule().beta_N;
    r.white = white.value() / dN;
    r.xi = xisum.value() / dN;
    r.v = bN == 0 ? 0.0 : vsum.value() / (bN * dN * dN);
    r.log_sum = bN == 0 ? 0.0 : lsum.value() / (bN * dN * dN);
  }
  return r;
}

/// Leave-one-out centred H pairings from the uncentred sums of a batch. With a
/// per-slice centring c(n) estimated from the other samples, the centring term
/// collapses to the mean of the other samples' sums.
inline std::vector<double> centred_h(const std::vector<double>& log_sums) {
  const std::size_t S = log_sums.size();
  if (S < 2) throw DomainError("leave-one-out centring needs at least 2 samples");
  CompensatedSum t;
  for (double v : log_sums) t.add(v);
  std::vector<double> h(S);
  for (std::size_t s = 0; s < S; ++s) h[s] = log_sums[s] - (t.value() - log_sums[s]) / double(S - 1);
  return h;
}

}  // namespace dpchaos

#endif  // DPCHAOS_POLYMER_SIM_HPP
