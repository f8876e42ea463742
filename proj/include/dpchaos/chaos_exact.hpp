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

// Polynomial chaos of the partition function, evaluated exactly.
//
// With chains 0 = n_0 < n_1 < ... < n_k <= N, x_0 = 0,
//
//   Z = 1 + sum_k sigma^k sum prod_i q_{n_i - n_{i-1}}(x_i - x_{i-1}) eta(n_i, x_i).
//
// The dominated chaos keeps the chains whose gaps after the first never exceed
// n_1. Realization-level evaluators use the walk killed on leaving the box
// |x|_inf <= R, which is the chaos of the truncated field of polymer_sim.
// Space-summed moments use the free walk through u_n = sum_x q_n(x)^2.

#ifndef DPCHAOS_CHAOS_EXACT_HPP
#define DPCHAOS_CHAOS_EXACT_HPP

#include <algorithm>
#include <climits>
#include <cmath>
#include <cstddef>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "dpchaos/common.hpp"
#include "dpchaos/disorder.hpp"
#include "dpchaos/lattice.hpp"
#include "dpchaos/polymer_sim.hpp"
#include "dpchaos/walk_kernels.hpp"

namespace dpchaos {

inline constexpr int kEnumerationMaxN = 8;
inline constexpr int kRecordMaxN = 6;
inline constexpr int kXdomExactMaxN = 256;
inline constexpr int kMomentMaxN = 4096;

struct ChainDPConfig {
  int N = 1;
  int box_radius = 1;
  int k_max = INT_MAX;  // chains of length <= k_max
  int exact_max_n = kXdomExactMaxN;  // budget for the dominated-chaos DPs
};

enum class EvalMode { kEnumeration, kDP };

namespace detail {

inline void check_plane(const DisorderPlane& plane, const CouplingSchedule& s, const ChainDPConfig& c) {
  if (c.N < 1 || c.N > plane.horizon()) throw DomainError("config horizon outside the plane");
  if (c.box_radius < 1 || c.box_radius > plane.box_radius())
    throw DomainError("config box outside the plane");
  if (c.k_max < 1) throw DomainError("k_max must be >= 1");
  if (s.beta_N != plane.schedule().beta_N || s.N != plane.horizon())
    throw DomainError("schedule does not match the disorder plane");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Enumeration oracles

/// q_m(x -> y) for the walk killed on leaving |x|_inf <= R, for m <= n_max.
class ChainKernel {
 public:
  ChainKernel(int box_radius, int n_max) : R_(box_radius), n_max_(n_max) {
    if (box_radius < 1 || n_max < 0) throw DomainError("ChainKernel: bad arguments");
    if (R_ >= n_max_) return;  // started inside the light cone, no walk can leave
    const int W = 2 * R_ + 1;
    const std::size_t cells = std::size_t(W) * W;
    table_.assign(std::size_t(n_max_) * cells * cells, 0.0);
    std::vector<double> cur(cells), next(cells);
    for (std::size_t s = 0; s < cells; ++s) {
      std::fill(cur.begin(), cur.end(), 0.0);
      cur[s] = 1.0;
      for (int m = 1; m <= n_max_; ++m) {
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t c = 0; c < cells; ++c) {
          if (cur[c] == 0) continue;
          const Site x = site_of(c);
          for (const Site& d : kNeighbours) {
            const Site y = x + d;
            if (y.linf() <= R_) next[index_of(y)] += 0.25 * cur[c];
          }
        }
        std::copy(next.begin(), next.end(), table_.begin() + std::ptrdiff_t(((m - 1) * cells + s) * cells));
        cur.swap(next);
      }
    }
  }

  int box_radius() const { return R_; }
  int n_max() const { return n_max_; }

  double operator()(int m, Site x, Site y) const {
    if (m < 1 || m > n_max_) throw DomainError("ChainKernel: time out of range");
    if (x.linf() > R_ || y.linf() > R_) return 0.0;
    if (table_.empty()) {
      if (x.linf() + m <= R_) return rw_kernel_2d(m, y - x);
      return killed_direct(m, x, y);
    }
    const std::size_t cells = std::size_t(2 * R_ + 1) * (2 * R_ + 1);
    return table_[(std::size_t(m - 1) * cells + index_of(x)) * cells + index_of(y)];
  }

  /// Calls f(y) for every y in the box that m steps can reach from x.
  template <class F>
  void for_each_target(int m, Site x, F&& f) const {
    for (int d1 = -m; d1 <= m; ++d1) {
      const int rest = m - std::abs(d1);
      for (int d2 = -rest; d2 <= rest; d2 += 2) {
        const Site y{x.x1 + d1, x.x2 + d2};
        if (y.linf() <= R_) f(y);
      }
    }
  }

 private:
  // Killed kernel by direct propagation, for starts near the edge of a large box.
  double killed_direct(int m, Site x, Site y) const {
    const int W = 2 * m + 1;
    std::vector<double> cur(std::size_t(W) * W, 0.0), next(cur.size());
    auto idx = [&](Site d) { return std::size_t(d.x1 + m) * std::size_t(W) + std::size_t(d.x2 + m); };
    cur[idx({0, 0})] = 1.0;
    for (int step = 0; step < m; ++step) {
      std::fill(next.begin(), next.end(), 0.0);
      for (int d1 = -m; d1 <= m; ++d1)
        for (int d2 = -m; d2 <= m; ++d2) {
          const double v = cur[idx({d1, d2})];
          if (v == 0) continue;
          for (const Site& e : kNeighbours) {
            const Site d{d1 + e.x1, d2 + e.x2};
            if ((x + d).linf() <= R_ && d.linf() <= m) next[idx(d)] += 0.25 * v;
          }
        }
      cur.swap(next);
    }
    const Site d = y - x;
    return d.linf() <= m ? cur[idx(d)] : 0.0;
  }

  std::size_t index_of(Site x) const {
    return std::size_t(x.x1 + R_) * std::size_t(2 * R_ + 1) + std::size_t(x.x2 + R_);
  }
  Site site_of(std::size_t c) const {
    const int W = 2 * R_ + 1;
    return {int(c / std::size_t(W)) - R_, int(c % std::size_t(W)) - R_};
  }

  int R_;
  int n_max_;
  std::vector<double> table_;
};

namespace detail {

/// sigma eta(n, x) = w(n, x) - 1.
inline double tilt(const DisorderPlane& plane, int n, Site x) {
  return plane.sample_weight(n, x) - 1.0;
}

inline double enumerate_chains(const DisorderPlane& plane, const ChainKernel& q, int N, int k_max,
                               int t, Site x, int k) {
  if (k >= k_max) return 0.0;
  double s = 0;
  for (int t2 = t + 1; t2 <= N; ++t2)
    q.for_each_target(t2 - t, x, [&](Site y) {
      const double term = q(t2 - t, x, y) * tilt(plane, t2, y);
      if (term != 0) s += term * (1.0 + enumerate_chains(plane, q, N, k_max, t2, y, k + 1));
    });
  return s;
}

}  // namespace detail

namespace detail {

inline double constrained_chaos(const DisorderPlane& plane, const ChainKernel& q, int a, int b,
                                int b_end, Site x, Site z, Site z_end) {
  if (!parity_ok(b - a, z - x) || !parity_ok(b_end - b, z_end - z)) return 0.0;
  const double head = q(b - a, x, z) * tilt(plane, b, z);
  if (head == 0) return 0.0;
  if (b == b_end) return z == z_end ? head : 0.0;
  // Chains from (b, z) to (b', z') with gaps <= b.
  auto inner = [&](auto&& self, int t, Site y) -> double {
    if (t == b_end) return y == z_end ? 1.0 : 0.0;
    double s = 0;
    for (int t2 = t + 1; t2 <= std::min(t + b, b_end); ++t2)
      q.for_each_target(t2 - t, y, [&](Site y2) {
        const double term = q(t2 - t, y, y2) * tilt(plane, t2, y2);
        if (term != 0) s += term * self(self, t2, y2);
      });
    return s;
  };
  return head * inner(inner, b, z);
}

}  // namespace detail

/// The dominated chaos pinned at (a, x), (b, z), (b', z'), all gaps after b at most b.
inline double xdom_constrained_eval(const DisorderPlane& plane, const CouplingSchedule& schedule,
                                    int a, int b, int b_end, Site x, Site z, Site z_end,
                                    int box_radius) {
  if (!(0 <= a && a < b && b <= b_end && b_end <= plane.horizon()))
    throw DomainError("xdom_constrained_eval: need 0 <= a < b <= b' <= N");
  if (b_end > kEnumerationMaxN) throw BudgetError("xdom_constrained_eval: enumeration needs b' <= 8");
  if (schedule.beta_N != plane.schedule().beta_N) throw DomainError("schedule does not match the plane");
  if (box_radius < 1 || box_radius > plane.box_radius()) throw DomainError("box outside the plane");
  return detail::constrained_chaos(plane, ChainKernel(box_radius, b_end), a, b, b_end, x, z, z_end);
}

/// 1 + sum over record skeletons of products of pinned dominated chaoses.
inline double record_decomposition_eval(const DisorderPlane& plane, const CouplingSchedule& schedule,
                                        const ChainDPConfig& config) {
  detail::check_plane(plane, schedule, config);
  if (config.N > kRecordMaxN) throw BudgetError("record_decomposition_eval: N must be <= 6");
  const int N = config.N, R = config.box_radius;
  const ChainKernel q(R, N);
  // Blocks after one ending at (b_prev', z_prev') with record time b_prev.
  auto rest = [&](auto&& self, int b_prev, int bp_prev, Site zp_prev) -> double {
    double s = 0;
    for (int b = bp_prev + b_prev + 1; b <= N; ++b)
      q.for_each_target(b - bp_prev, zp_prev, [&](Site z) {
        for (int bp = b; bp <= N; ++bp)
          q.for_each_target(bp - b, z, [&](Site zp) {
            const double x = detail::constrained_chaos(plane, q, bp_prev, b, bp, zp_prev, z, zp);
            if (x != 0) s += x * (1.0 + self(self, b, bp, zp));
          });
      });
    return s;
  };
  return 1.0 + rest(rest, 0, 0, {0, 0});
}

namespace detail {

/// Walks of length 0 reach only their start.
template <class F>
void for_each_target0(const ChainKernel& q, int m, Site x, F&& f) {
  if (m == 0) {
    f(x);
    return;
  }
  q.for_each_target(m, x, f);
}

}  // namespace detail

/// Dominated chaos by enumeration: first times in [lo, hi], all times <= horizon.
inline double xdom_enumerate(const DisorderPlane& plane, int box_radius, int lo, int hi, int horizon) {
  if (horizon > kEnumerationMaxN) throw BudgetError("xdom_enumerate: horizon must be <= 8");
  const ChainKernel q(box_radius, horizon);
  double total = 0;
  for (int n1 = std::max(lo, 1); n1 <= hi; ++n1)
    q.for_each_target(n1, {0, 0}, [&](Site x1) {
      const double head = q(n1, {0, 0}, x1) * detail::tilt(plane, n1, x1);
      if (head == 0) return;
      auto tail = [&](auto&& self, int t, Site y) -> double {
        double s = 0;
        for (int t2 = t + 1; t2 <= std::min(t + n1, horizon); ++t2)
          q.for_each_target(t2 - t, y, [&](Site y2) {
            const double term = q(t2 - t, y, y2) * detail::tilt(plane, t2, y2);
            if (term != 0) s += term * (1.0 + self(self, t2, y2));
          });
        return s;
      };
      total += head * (1.0 + tail(tail, n1, x1));
    });
  return total;
}

// ---------------------------------------------------------------------------
// Forward DPs on the light cone of the origin

namespace detail {

class ConeDP {
 public:
  ConeDP(const DisorderPlane& plane, int box_radius, int horizon, bool cache)
      : plane_(plane), g_(box_radius, 0), horizon_(horizon), row_(std::size_t(g_.width()) + 8) {
    if (horizon < 1 || horizon > plane.horizon()) throw DomainError("horizon outside the plane");
    if (box_radius > plane.box_radius()) throw DomainError("box exceeds the disorder plane");
    if (cache) {
      tilts_.reserve(std::size_t(horizon));
      for (int m = 1; m <= horizon; ++m) {
        BoxField f(g_, 0.0);
        for_rows(m, [&](int a, int lo, int hi) { fill_tilt(m, a, lo, hi, f.row(a) + lo); });
        tilts_.push_back(std::move(f));
      }
    }
  }

  const BoxGeometry& geo() const { return g_; }
  BoxField field() const { return BoxField(g_, 0.0); }

  /// Calls f(a, lo, hi) for the nonempty rows of the cone-box at time m.
  template <class F>
  void for_rows(int m, F&& f) const {
    const int o = g_.origin(m), c_lo = -o, c_hi = m - o;
    const int a_lo = std::max(0, c_lo), a_hi = std::min(g_.rows(m).second, c_hi);
    for (int a = a_lo; a <= a_hi; ++a) {
      auto [lo, hi] = g_.cols(m, a);
      lo = std::max(lo, c_lo);
      hi = std::min(hi, c_hi);
      if (lo <= hi) f(a, lo, hi);
    }
  }

  /// next = P old at time m (old at time m - 1), on the cone-box.
  void propagate(int m, const BoxField& old, BoxField& next) const {
    const int o = g_.origin(m), c_lo = -o, c_hi = m - o;
    forward_average(g_, m, old, next, std::max(0, c_lo), std::min(g_.rows(m).second, c_hi), c_lo,
                    c_hi);
  }

  /// f *= sigma eta(m) on the cone-box; returns the sum of the result.
  double weigh(int m, BoxField& f) {
    CompensatedSum s;
    for_rows(m, [&](int a, int lo, int hi) {
      const double* t = tilt_row(m, a, lo, hi);
      double* r = f.row(a);
      double acc = 0;
      for (int b = lo; b <= hi; ++b) {
        r[b] *= t[b - lo];
        acc += r[b];
      }
      s.add(acc);
    });
    return s.value();
  }

  /// dst += src on the cone-box at time m.
  void add(int m, BoxField& dst, const BoxField& src) const {
    for_rows(m, [&](int a, int lo, int hi) {
      double* d = dst.row(a);
      const double* s = src.row(a);
      for (int b = lo; b <= hi; ++b) d[b] += s[b];
    });
  }

  double sum(int m, const BoxField& f) const {
    CompensatedSum s;
    for_rows(m, [&](int a, int lo, int hi) {
      const double* r = f.row(a);
      double acc = 0;
      for (int b = lo; b <= hi; ++b) acc += r[b];
      s.add(acc);
    });
    return s.value();
  }

 private:
  void fill_tilt(int m, int a, int lo, int hi, double* out) const {
    const int o = g_.origin(m);
    plane_.fill_weights(m, g_.site(m, a + o, lo + o), {1, -1}, hi - lo + 1, out);
    for (int l = 0; l <= hi - lo; ++l) out[l] -= 1.0;
  }

  const double* tilt_row(int m, int a, int lo, int hi) {
    if (!tilts_.empty()) return tilts_[std::size_t(m - 1)].row(a) + lo;
    fill_tilt(m, a, lo, hi, row_.data());
    return row_.data();
  }

  const DisorderPlane& plane_;
  BoxGeometry g_;
  int horizon_;
  std::vector<BoxField> tilts_;
  std::vector<double> row_;
};

/// Pair of buffers for one quantity, indexed by time parity.
struct TimePair {
  std::array<BoxField, 2> f;
  BoxField& at(int m) { return f[std::size_t(m & 1)]; }
  const BoxField& at(int m) const { return f[std::size_t(m & 1)]; }
};

}  // namespace detail

/// Chaos of Z(0, 0) truncated at order k_max, by forward DP split by order:
/// F_k(n) = sigma eta(n) U_k(n), U_k(n) = P (U_k(n - 1) + F_{k-1}(n - 1)).
inline double chaos_dp_orders(const DisorderPlane& plane, int box_radius, int N, int k_max) {
  detail::ConeDP dp(plane, box_radius, N, false);
  const int K = std::min(k_max, N);
  std::vector<detail::TimePair> U(std::size_t(K) + 1), F(std::size_t(K) + 1);
  for (int k = 0; k <= K; ++k) {
    U[std::size_t(k)].f = {dp.field(), dp.field()};
    F[std::size_t(k)].f = {dp.field(), dp.field()};
  }
  {
    auto [a, b] = dp.geo().cell(0, {0, 0});
    F[0].at(0).at(a, b) = 1.0;
  }
  CompensatedSum total;
  total.add(1.0);
  for (int n = 1; n <= N; ++n) {
    for (int k = std::min(K, n); k >= 1; --k) {
      BoxField& prev = U[std::size_t(k)].at(n - 1);
      if (n - 1 >= k - 1) dp.add(n - 1, prev, F[std::size_t(k - 1)].at(n - 1));
      BoxField& cur = U[std::size_t(k)].at(n);
      dp.propagate(n, prev, cur);
      BoxField& f = F[std::size_t(k)].at(n);
      dp.for_rows(n, [&](int a, int lo, int hi) {
        std::copy(cur.row(a) + lo, cur.row(a) + hi + 1, f.row(a) + lo);
      });
      total.add(dp.weigh(n, f));
    }
    // F_0 lives at time 0 only.
    if (n == 1) {
      auto [a, b] = dp.geo().cell(0, {0, 0});
      F[0].at(0).at(a, b) = 0.0;
    }
  }
  return total.value();
}

/// Z(0, 0) from its chaos expansion. Enumeration sums every chain explicitly
/// (N <= 8); DP mode runs the forward recursion, split by order when k_max < N.
inline double chaos_eval_Z(const DisorderPlane& plane, const CouplingSchedule& schedule,
                           const ChainDPConfig& config, EvalMode mode = EvalMode::kEnumeration) {
  detail::check_plane(plane, schedule, config);
  if (schedule.sigma_N == 0) return 1.0;
  if (mode == EvalMode::kEnumeration) {
    if (config.N > kEnumerationMaxN) throw BudgetError("chaos enumeration needs N <= 8");
    const ChainKernel q(config.box_radius, config.N);
    return 1.0 + detail::enumerate_chains(plane, q, config.N, config.k_max, 0, {0, 0}, 0);
  }
  if (config.k_max >= config.N && config.N == plane.horizon())
    return partition_at_origin(plane, config.box_radius);
  return chaos_dp_orders(plane, config.box_radius, config.N, config.k_max);
}

/// Dominated chaos restricted to first times n_1 in [lo, hi] and all chain
/// times <= horizon (gaps after n_1 at most n_1). Caps n_1 >= horizon / 2 are
/// inactive and share one unconstrained pass; each smaller cap runs a ring of
/// the last n_1 propagated chain ends.
inline double dominated_sum(const DisorderPlane& plane, int box_radius, int lo, int hi, int horizon,
                            std::size_t memory_budget = kDefaultMemoryBudget) {
  lo = std::max(lo, 1);
  hi = std::min(hi, horizon);
  if (lo > hi) return 0.0;
  const int free_from = std::max(lo, (horizon + 1) / 2);
  const int capped_hi = std::min(hi, free_from - 1);
  const bool need_cache = capped_hi >= lo;
  const std::size_t field_bytes = BoxField(BoxGeometry(box_radius), 0.0).bytes();
  const std::size_t need =
      field_bytes * (std::size_t(need_cache ? horizon : 0) + 2 * std::size_t(std::max(capped_hi, 0)) + 8);
  if (need > memory_budget)
    throw BudgetError("dominated_sum needs " + std::to_string(need) + " bytes, budget " +
                      std::to_string(memory_budget));
  detail::ConeDP dp(plane, box_radius, horizon, need_cache);
  CompensatedSum total;

  // D(n) = P^n delta_0 (killed).
  detail::TimePair D{{dp.field(), dp.field()}};
  {
    auto [a, b] = dp.geo().cell(0, {0, 0});
    D.at(0).at(a, b) = 1.0;
  }
  int d_time = 0;
  auto advance_d = [&](int to) {
    for (; d_time < to; ++d_time) dp.propagate(d_time + 1, D.at(d_time), D.at(d_time + 1));
  };

  // Capped first times: ring of P^{n - t} F(t), t in [n - c, n - 1].
  struct Entry {
    int t;
    detail::TimePair buf;
  };
  std::vector<Entry> pool;
  for (int c = lo; c <= capped_hi; ++c) {
    advance_d(c);
    std::vector<Entry> ring;
    auto fresh = [&]() {
      Entry e;
      if (!pool.empty()) {
        e = std::move(pool.back());
        pool.pop_back();
        e.buf.f[0].fill(0.0);
        e.buf.f[1].fill(0.0);
      } else {
        e.buf.f = {dp.field(), dp.field()};
      }
      return e;
    };
    {
      Entry e = fresh();
      e.t = c;
      BoxField& f = e.buf.at(c);
      dp.for_rows(c, [&](int a, int l, int h) {
        std::copy(D.at(c).row(a) + l, D.at(c).row(a) + h + 1, f.row(a) + l);
      });
      total.add(dp.weigh(c, f));
      ring.push_back(std::move(e));
    }
    BoxField s = dp.field();
    BoxField s_alt = dp.field();
    for (int n = c + 1; n <= horizon; ++n) {
      BoxField& acc = (n & 1) ? s : s_alt;
      dp.for_rows(n, [&](int a, int l, int h) { std::fill(acc.row(a) + l, acc.row(a) + h + 1, 0.0); });
      for (Entry& e : ring) {
        dp.propagate(n, e.buf.at(n - 1), e.buf.at(n));
        dp.add(n, acc, e.buf.at(n));
      }
      Entry e = fresh();
      e.t = n;
      BoxField& f = e.buf.at(n);
      dp.for_rows(n, [&](int a, int l, int h) {
        std::copy(acc.row(a) + l, acc.row(a) + h + 1, f.row(a) + l);
      });
      total.add(dp.weigh(n, f));
      ring.push_back(std::move(e));
      // Ends at t = n - c cannot reach n + 1 within the cap.
      auto old = std::find_if(ring.begin(), ring.end(), [&](const Entry& x) { return x.t == n - c; });
      if (old != ring.end()) {
        pool.push_back(std::move(*old));
        ring.erase(old);
      }
    }
    for (Entry& e : ring) pool.push_back(std::move(e));
  }

  // Uncapped first times in [free_from, hi]: U(n) = P (U(n - 1) + F(n - 1)),
  // F(n) = sigma eta(n) (U(n) + 1{free_from <= n <= hi} D(n)).
  if (free_from <= hi) {
    detail::TimePair U{{dp.field(), dp.field()}};
    detail::TimePair F{{dp.field(), dp.field()}};
    advance_d(free_from);
    for (int n = free_from; n <= horizon; ++n) {
      if (n > free_from) {
        dp.add(n - 1, U.at(n - 1), F.at(n - 1));
        dp.propagate(n, U.at(n - 1), U.at(n));
      }
      BoxField& f = F.at(n);
      dp.for_rows(n, [&](int a, int l, int h) {
        std::copy(U.at(n).row(a) + l, U.at(n).row(a) + h + 1, f.row(a) + l);
      });
      if (n <= hi) {
        advance_d(n);
        dp.add(n, f, D.at(n));
      }
      total.add(dp.weigh(n, f));
    }
  }
  return total.value();
}

inline double xdom_eval(const DisorderPlane& plane, const CouplingSchedule& schedule,
                        const ChainDPConfig& config) {
  detail::check_plane(plane, schedule, config);
  if (config.N > config.exact_max_n)
    throw BudgetError("xdom_eval: N = " + std::to_string(config.N) + " beyond the exact-mode budget");
  return dominated_sum(plane, config.box_radius, 1, config.N, config.N);
}

// ---------------------------------------------------------------------------
// Logarithmic blocks

/// Integer time block (first, last]; the first block includes time 1.
struct LogBlock {
  int first = 1;  // inclusive
  int last = 0;   // inclusive
  bool empty() const { return first > last; }
};

/// floor(N^(j/M)) exactly.
inline long long floor_root_power(long long N, int M, int j) {
  using boost::multiprecision::cpp_int;
  if (j == 0) return 1;
  if (j == M) return N;
  const cpp_int target = boost::multiprecision::pow(cpp_int(N), unsigned(j));
  long long b = static_cast<long long>(std::floor(std::pow(double(N), double(j) / M)));
  auto fits = [&](long long v) { return boost::multiprecision::pow(cpp_int(v), unsigned(M)) <= target; };
  while (b > 1 && !fits(b)) --b;
  while (fits(b + 1)) ++b;
  return b;
}

inline LogBlock log_block(int N, int M, int j) {
  if (N < 1 || M < 1 || j < 1 || j > M) throw DomainError("log_block: need N >= 1, 1 <= j <= M");
  LogBlock b;
  b.last = int(floor_root_power(N, M, j));
  b.first = j == 1 ? 1 : int(floor_root_power(N, M, j - 1)) + 1;
  return b;
}

struct BlockEval {
  double value = 0;
  bool empty_block = false;
};

inline BlockEval xdom_block_eval(const DisorderPlane& plane, const CouplingSchedule& schedule, int N,
                                 int M, int j, int box_radius, int exact_max_n = kXdomExactMaxN) {
  detail::check_plane(plane, schedule, {N, box_radius});
  const LogBlock blk = log_block(N, M, j);
  if (blk.empty()) return {0.0, true};
  if (blk.last > exact_max_n)
    throw BudgetError("xdom_block_eval: block end beyond the exact-mode budget");
  return {dominated_sum(plane, box_radius, blk.first, blk.last, blk.last), false};
}

/// prod_j (1 + X(j)).
inline double zdiff_eval(const DisorderPlane& plane, const CouplingSchedule& schedule, int N, int M,
                         int box_radius, int exact_max_n = kXdomExactMaxN) {
  double p = 1.0;
  for (int j = 1; j <= M; ++j)
    p *= 1.0 + xdom_block_eval(plane, schedule, N, M, j, box_radius, exact_max_n).value;
  return p;
}

// ---------------------------------------------------------------------------
// Second moments over the disorder

namespace detail {

inline std::vector<double> collision_weights(int N) {
  std::vector<double> u(std::size_t(N) + 1, 0.0);
  if (N >= 1) {
    const ReturnTable t = overlap_sum(N);
    for (int n = 1; n <= N; ++n) u[std::size_t(n)] = t.u_at(n);
  }
  return u;
}

inline void check_moment_args(int N, double sigma) {
  if (N < 0) throw DomainError("horizon must be >= 0");
  if (N > kMomentMaxN) throw BudgetError("moment DP horizon beyond budget");
  if (!(sigma >= 0)) throw DomainError("sigma must be >= 0");
}

}  // namespace detail

/// E[Z_n^2] for n = 0..N: renewal D(0) = 1, D(n) = sigma^2 sum_{m<n} D(m) u_{n-m}.
inline std::vector<double> second_moment_Z_curve(int N, double sigma) {
  detail::check_moment_args(N, sigma);
  const auto u = detail::collision_weights(N);
  const double s2 = sigma * sigma;
  std::vector<double> D(std::size_t(N) + 1), out(std::size_t(N) + 1);
  D[0] = 1.0;
  CompensatedSum acc;
  acc.add(1.0);
  out[0] = 1.0;
  for (int n = 1; n <= N; ++n) {
    CompensatedSum s;
    for (int m = 0; m < n; ++m) s.add(D[std::size_t(m)] * u[std::size_t(n - m)]);
    D[std::size_t(n)] = s2 * s.value();
    acc.add(D[std::size_t(n)]);
    out[std::size_t(n)] = acc.value();
  }
  return out;
}

inline double second_moment_Z(int N, double sigma) { return second_moment_Z_curve(N, sigma).back(); }

/// 1 / (1 - sigma^2 R_N) when sigma^2 R_N < 1; empty otherwise.
inline std::optional<double> second_moment_bound(int N, double sigma) {
  const double x = sigma * sigma * (N >= 1 ? overlap_sum(N).r_at(N) : 0.0);
  if (x >= 1) return std::nullopt;
  return 1.0 / (1.0 - x);
}

/// Second-moment mass of the order-k chaos of Z_N, k = 1..K (entry 0 is the
/// constant term 1).
inline std::vector<double> order_masses_Z(int N, double sigma, int K) {
  detail::check_moment_args(N, sigma);
  if (K < 1) throw DomainError("K must be >= 1");
  const auto u = detail::collision_weights(N);
  const double s2 = sigma * sigma;
  std::vector<double> masses(std::size_t(K) + 1, 0.0);
  masses[0] = 1.0;
  // D_k(n): order-k chains ending at n.
  std::vector<double> prev(std::size_t(N) + 1, 0.0), cur(std::size_t(N) + 1);
  prev[0] = 1.0;
  for (int k = 1; k <= K; ++k) {
    std::fill(cur.begin(), cur.end(), 0.0);
    CompensatedSum mk;
    for (int n = k; n <= N; ++n) {
      CompensatedSum s;
      for (int m = k - 1; m < n; ++m) s.add(prev[std::size_t(m)] * u[std::size_t(n - m)]);
      cur[std::size_t(n)] = s2 * s.value();
      mk.add(cur[std::size_t(n)]);
    }
    masses[std::size_t(k)] = mk.value();
    prev.swap(cur);
  }
  return masses;
}

/// sigma^2 sum_{n_1 in [lo, hi]} u_{n_1} G_h(n_1, n_1) with
/// G_h(n, c) = 1 + sigma^2 sum_{m=1}^{min(c, h-n)} u_m G_h(n + m, c).
inline double dominated_mass(int lo, int hi, int horizon, double sigma) {
  detail::check_moment_args(horizon, sigma);
  lo = std::max(lo, 1);
  hi = std::min(hi, horizon);
  if (lo > hi) return 0.0;
  const auto u = detail::collision_weights(horizon);
  const double s2 = sigma * sigma;
  std::vector<double> G(std::size_t(horizon) + 1);
  auto solve = [&](int c, int from) {
    for (int n = horizon; n >= from; --n) {
      CompensatedSum s;
      const int top = std::min(c, horizon - n);
      for (int m = 1; m <= top; ++m) s.add(u[std::size_t(m)] * G[std::size_t(n + m)]);
      G[std::size_t(n)] = 1.0 + s2 * s.value();
    }
  };
  CompensatedSum total;
  const int free_from = std::max(lo, (horizon + 1) / 2);
  for (int c = lo; c <= std::min(hi, free_from - 1); ++c) {
    solve(c, c);
    total.add(u[std::size_t(c)] * G[std::size_t(c)]);
  }
  if (free_from <= hi) {
    solve(horizon, free_from);
    for (int c = free_from; c <= hi; ++c) total.add(u[std::size_t(c)] * G[std::size_t(c)]);
  }
  return s2 * total.value();
}

inline double second_moment_xdom(int N, double sigma) { return dominated_mass(1, N, N, sigma); }

inline double second_moment_xdom_block(int N, int M, int j, double sigma) {
  const LogBlock b = log_block(N, M, j);
  if (b.empty()) return 0.0;
  return dominated_mass(b.first, b.last, b.last, sigma);
}

/// log[(1 - beta_hat^2 (j-1)/M) / (1 - beta_hat^2 j/M)].
inline double i_mj(double beta_hat, int M, int j) {
  if (!(beta_hat > 0 && beta_hat < 1)) throw DomainError("i_mj: beta_hat must lie in (0, 1)");
  if (M < 1 || j < 1 || j > M) throw DomainError("i_mj: need 1 <= j <= M");
  const double b2 = beta_hat * beta_hat;
  return std::log1p(-b2 * (j - 1) / M) - std::log1p(-b2 * double(j) / M);
}

/// Var(mu <W, psi> + lambda <Xi, psi>) =
/// (1/N^2) sum psibar(n, x)^2 [mu^2 + lambda^2 (E[Z_{N-n}^2] - 1)].
inline double singular_second_moment(const PsiTable& psi, int N, double mu, double lambda,
                                     double sigma) {
  if (psi.horizon() != N) throw DomainError("psi table built for a different N");
  const auto e2 = second_moment_Z_curve(N, sigma);
  CompensatedSum s;
  for (int n = psi.n_lo(); n <= psi.n_hi(); ++n) {
    CompensatedSum slice;
    psi.for_each(n, [&](Site, double v) { slice.add(v * v); });
    s.add(slice.value() * (mu * mu + lambda * lambda * (e2[std::size_t(N - n)] - 1.0)));
  }
  return s.value() / (double(N) * N);
}

/// Per-N or per-block second moments with their targets, for CSV export.
struct MomentCurve {
  std::string tag;
  std::vector<long> index;
  std::vector<double> value;
  std::vector<double> target;

  void write_csv(std::ostream& os) const {
    os << "N,value,target,constraint\n";
    os.precision(17);
    for (std::size_t i = 0; i < index.size(); ++i)
      os << index[i] << ',' << value[i] << ',' << target[i] << ',' << tag << '\n';
  }
};

}  // namespace dpchaos

#endif  // DPCHAOS_CHAOS_EXACT_HPP
