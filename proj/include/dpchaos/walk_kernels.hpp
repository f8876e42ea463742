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

// Transition kernels of the simple random walk on Z^2.
//
// In the rotated coordinates u = x1 + x2, v = x1 - x2 the two components of
// the 2D walk are independent 1D simple walks, so
//
//   q_n(x) = p_n(x1 + x2) * p_n(x1 - x2),   p_n(k) = 2^-n binom(n, (n+k)/2).
//
// This is the fast path for point queries; the tabulated convolution
// (build_kernel_table) is kept as an independent cross-check.

#ifndef DPCHAOS_WALK_KERNELS_HPP
#define DPCHAOS_WALK_KERNELS_HPP

#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <vector>

#include "dpchaos/common.hpp"

namespace dpchaos {

namespace detail {

/// log(n!) - log(sqrt(2 pi n) (n/e)^n), the Stirling remainder.
inline double stirling_remainder(double n) {
  constexpr double S0 = 1.0 / 12, S1 = 1.0 / 360, S2 = 1.0 / 1260, S3 = 1.0 / 1680,
                   S4 = 1.0 / 1188;
  if (n <= 15.0) {
    const long double nl = n;
    const long double half_log_2pi = 0.918938533204672741780329736405617639L;
    return static_cast<double>(std::lgamma(nl + 1.0L) - (nl + 0.5L) * std::log(nl) + nl -
                               half_log_2pi);
  }
  const double nn = n * n;
  if (n > 500) return (S0 - S1 / nn) / n;
  if (n > 80) return (S0 - (S1 - S2 / nn) / nn) / n;
  if (n > 35) return (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n;
  return (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n;
}

/// x log(x / m) + m - x without cancellation when x is close to m.
inline double deviance_term(double x, double m) {
  if (std::abs(x - m) < 0.1 * (x + m)) {
    double v = (x - m) / (x + m);
    double s = (x - m) * v;
    double ej = 2 * x * v;
    v *= v;
    for (int j = 1; j < 1000; ++j) {
      ej *= v;
      const double s1 = s + ej / (2 * j + 1);
      if (s1 == s) return s1;
      s = s1;
    }
    return s;
  }
  return x * std::log(x / m) + m - x;
}

/// 2^-n binom(n, j) by a direct product; exact to a few ulp for n <= 1000.
inline double half_binomial_product(int n, int j) {
  const int k = std::min(j, n - j);
  double r = 1.0;
  for (int i = 0; i < k; ++i) r = r * (n - i) / (i + 1);
  return std::ldexp(r, -n);
}

/// 2^-n binom(n, j) in log space: saddle-point form with the Stirling
/// remainders and deviance terms accumulated by compensated summation.
inline double half_binomial_log_space(int n, int j) {
  if (j == 0 || j == n) return std::ldexp(1.0, -n);
  const double nd = n, jd = j, half = 0.5 * nd;
  CompensatedSum lc;
  lc += stirling_remainder(nd);
  lc += -stirling_remainder(jd);
  lc += -stirling_remainder(nd - jd);
  lc += -deviance_term(jd, half);
  lc += -deviance_term(nd - jd, half);
  const double lf = std::log(2 * kPi) + std::log(jd) + std::log1p(-jd / nd);
  return std::exp(lc.value() - 0.5 * lf);
}

}  // namespace detail

/// Threshold above which binomials are evaluated in log space.
inline constexpr int kLogSpaceBinomialThreshold = 512;

/// P(T_n = k) for the simple symmetric walk T on Z.
inline double rw_kernel_1d(int n, int k) {
  if (n < 0) throw DomainError("rw_kernel_1d: negative time");
  if (std::abs(k) > n || ((n + k) & 1) != 0) return 0.0;
  const int j = (n + k) / 2;
  if (n > kLogSpaceBinomialThreshold) return detail::half_binomial_log_space(n, j);
  return detail::half_binomial_product(n, j);
}

/// q_n(x) = P(S_n = x | S_0 = 0) for the simple symmetric walk S on Z^2.
inline double rw_kernel_2d(int n, Site x) {
  if (n < 0) throw DomainError("rw_kernel_2d: negative time");
  if (x.l1() > n || !parity_ok(n, x)) return 0.0;
  return rw_kernel_1d(n, x.x1 + x.x2) * rw_kernel_1d(n, x.x1 - x.x2);
}

/// u_n = sum_z q_n(z)^2 = P(S_2n = 0).
inline double collision_weight(int n) {
  if (n < 1) throw DomainError("collision_weight: n must be >= 1");
  return sq(rw_kernel_1d(2 * n, 0));
}

/// Dense table of q_n(x) for 1 <= n <= n_max and |x|_inf <= box_radius,
/// built by repeated nearest-neighbour averaging.
class KernelTable {
 public:
  KernelTable() = default;
  KernelTable(int n_max, int box_radius)
      : n_max_(n_max),
        box_radius_(box_radius),
        side_(2 * box_radius + 1),
        values_(static_cast<std::size_t>(n_max) * side_ * side_, 0.0) {}

  int n_max() const { return n_max_; }
  int box_radius() const { return box_radius_; }

  bool in_box(Site x) const { return x.linf() <= box_radius_; }

  double at(int n, Site x) const {
    if (n < 1 || n > n_max_) throw DomainError("KernelTable::at: time out of range");
    if (!in_box(x)) return 0.0;
    return values_[index(n, x)];
  }

  double mass(int n) const {
    CompensatedSum s;
    for_each_site([&](Site x) { s += at(n, x); });
    return s.value();
  }

  double sum_of_squares(int n) const {
    CompensatedSum s;
    for_each_site([&](Site x) { s += sq(at(n, x)); });
    return s.value();
  }

  template <class F>
  void for_each_site(F&& f) const {
    for (int a = -box_radius_; a <= box_radius_; ++a)
      for (int b = -box_radius_; b <= box_radius_; ++b) f(Site{a, b});
  }

  /// CSV with columns n,x1,x2,q; zero entries are skipped.
  void write_csv(std::ostream& os) const {
    os << "n,x1,x2,q\n";
    os.precision(17);
    for (int n = 1; n <= n_max_; ++n)
      for_each_site([&](Site x) {
        const double q = at(n, x);
        if (q != 0.0) os << n << ',' << x.x1 << ',' << x.x2 << ',' << q << '\n';
      });
  }

 private:
  friend KernelTable build_kernel_table(int, int, std::size_t);

  std::size_t index(int n, Site x) const {
    return (static_cast<std::size_t>(n - 1) * side_ + (x.x1 + box_radius_)) * side_ +
           (x.x2 + box_radius_);
  }

  int n_max_ = 0;
  int box_radius_ = 0;
  int side_ = 1;
  std::vector<double> values_;
};

inline constexpr std::size_t kDefaultKernelTableBudget = std::size_t{256} << 20;

inline KernelTable build_kernel_table(int n_max, int box_radius,
                                      std::size_t memory_budget_bytes = kDefaultKernelTableBudget) {
  if (n_max < 1 || box_radius < 1) throw DomainError("build_kernel_table: n_max and box_radius must be >= 1");
  if (n_max > box_radius)
    throw DomainError("build_kernel_table: horizon exceeds box (mass would leak)");
  const double bytes = double(n_max) * sq(2.0 * box_radius + 1) * sizeof(double);
  if (bytes > double(memory_budget_bytes))
    throw BudgetError("build_kernel_table: table exceeds memory budget");

  KernelTable table(n_max, box_radius);
  const int side = 2 * box_radius + 1;
  std::vector<double> prev(std::size_t(side) * side, 0.0), next(prev.size());
  auto at = [side, box_radius](std::vector<double>& v, int a, int b) -> double& {
    return v[std::size_t(a + box_radius) * side + (b + box_radius)];
  };
  at(prev, 0, 0) = 1.0;
  for (int n = 1; n <= n_max; ++n) {
    for (int a = -box_radius; a <= box_radius; ++a)
      for (int b = -box_radius; b <= box_radius; ++b) {
        double s = 0.0;
        if (a > -box_radius) s += at(prev, a - 1, b);
        if (a < box_radius) s += at(prev, a + 1, b);
        if (b > -box_radius) s += at(prev, a, b - 1);
        if (b < box_radius) s += at(prev, a, b + 1);
        at(next, a, b) = 0.25 * s;
      }
    std::copy(next.begin(), next.end(),
              table.values_.begin() + static_cast<std::ptrdiff_t>(n - 1) * side * side);
    prev.swap(next);
  }
  return table;
}

/// Collision weights u_n and their partial sums R_n = u_1 + ... + u_n.
struct ReturnTable {
  std::vector<double> u;  // u[n-1] = u_n
  std::vector<double> r;  // r[n-1] = R_n

  int horizon() const { return static_cast<int>(u.size()); }
  double u_at(int n) const { return u.at(static_cast<std::size_t>(n - 1)); }
  /// R_n, with R_0 = 0.
  double r_at(int n) const { return n == 0 ? 0.0 : r.at(static_cast<std::size_t>(n - 1)); }
};

inline ReturnTable overlap_sum(int N) {
  if (N < 1) throw DomainError("overlap_sum: N must be >= 1");
  ReturnTable t;
  t.u.resize(N);
  t.r.resize(N);
  CompensatedSum acc;
  for (int n = 1; n <= N; ++n) {
    t.u[n - 1] = collision_weight(n);
    acc += t.u[n - 1];
    t.r[n - 1] = acc.value();
  }
  return t;
}

/// Leading local-limit term: (4/n) g(x / sqrt(n/2)) on sites of the right parity.
inline double llt_gaussian(int n, Site x) {
  if (n < 1) throw DomainError("llt_gaussian: n must be >= 1");
  if (!parity_ok(n, x)) return 0.0;
  return 2.0 / (kPi * n) * std::exp(-double(x.norm2()) / n);
}

/// Exponential integral E1(x) = int_x^inf e^-t / t dt, x > 0.
inline double expint_e1(double x) {
  if (!(x > 0.0)) throw DomainError("expint_e1: argument must be positive");
  constexpr double eps = std::numeric_limits<double>::epsilon();
  if (x < 1.0) {
    constexpr double euler_gamma = 0.57721566490153286061;
    double term = 1.0, sum = 0.0;
    for (int k = 1; k < 200; ++k) {
      term *= -x / k;
      const double add = -term / k;
      sum += add;
      if (std::abs(add) < eps * std::abs(sum)) break;
    }
    return -euler_gamma - std::log(x) + sum;
  }
  // Modified Lentz evaluation of the continued fraction.
  constexpr double tiny = 1e-300;
  double b = x + 1.0, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -double(i) * i;
    b += 2.0;
    d = 1.0 / (an * d + b);
    c = b + an / c;
    const double del = c * d;
    h *= del;
    if (std::abs(del - 1.0) < eps) break;
  }
  return h * std::exp(-x);
}

/// int_a^b g_u(y) du for |y|^2 = r2 > 0, allowing a = 0.
inline double heat_time_integral_r2(double a, double b, double r2) {
  if (!(r2 > 0.0)) throw DivergenceError("heat_time_integral: diagonal y = 0 diverges logarithmically");
  if (a < 0.0 || b < a) throw DomainError("heat_time_integral: need 0 <= a <= b");
  if (a == b) return 0.0;
  const double upper = expint_e1(r2 / (2.0 * b));
  const double lower = a > 0.0 ? expint_e1(r2 / (2.0 * a)) : 0.0;
  return (upper - lower) / (2.0 * kPi);
}

/// int_a^b g_u(y) du with g_u(y) = exp(-|y|^2 / 2u) / (2 pi u).
inline double heat_time_integral(double a, double b, Vec2 y) {
  if (!(a > 0.0)) throw DomainError("heat_time_integral: need a > 0");
  return heat_time_integral_r2(a, b, y.norm2());
}

}  // namespace dpchaos

#endif  // DPCHAOS_WALK_KERNELS_HPP
