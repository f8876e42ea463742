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

// Second-moment diagnostics for Gaussian limits of polynomial chaos.
//
// A family X = sum_A q(A) eta^A is described through its second-moment
// masses: in total, by order |A|, inside time boxes, and through the
// influence of single indices. The report collects these at one N; the
// limit judgement is left to the caller, who compares reports along N.

#ifndef DPCHAOS_CLT_CRITERION_HPP
#define DPCHAOS_CLT_CRITERION_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "dpchaos/chaos_exact.hpp"
#include "dpchaos/common.hpp"
#include "dpchaos/polymer_sim.hpp"
#include "dpchaos/walk_kernels.hpp"

namespace dpchaos {

/// Integer times first..last (inclusive); the box is all indices with such a time.
struct TimeBox {
  int first = 1;
  int last = 0;
  bool empty() const { return first > last; }
};

using BoxPartition = std::vector<TimeBox>;

inline void check_disjoint(BoxPartition boxes) {
  boxes.erase(std::remove_if(boxes.begin(), boxes.end(), [](const TimeBox& b) { return b.empty(); }),
              boxes.end());
  std::sort(boxes.begin(), boxes.end(), [](const TimeBox& a, const TimeBox& b) { return a.first < b.first; });
  for (std::size_t i = 1; i < boxes.size(); ++i)
    if (boxes[i].first <= boxes[i - 1].last) throw DomainError("boxes overlap");
}

/// ((j - 1) N / M, j N / M], j = 1..M.
inline BoxPartition linear_boxes(int N, int M) {
  if (N < 1 || M < 1) throw DomainError("linear_boxes: need N, M >= 1");
  BoxPartition b;
  for (int j = 1; j <= M; ++j)
    b.push_back({int(long(j - 1) * N / M) + 1, int(long(j) * N / M)});
  return b;
}

/// (N^((j - 1)/M), N^(j/M)], j = 1..M, with the first box starting at time 1.
inline BoxPartition log_boxes(int N, int M) {
  BoxPartition b;
  for (int j = 1; j <= M; ++j) {
    const LogBlock l = log_block(N, M, j);
    b.push_back({l.first, l.last});
  }
  return b;
}

/// Second-moment accessors of a chaos family. Order masses count |A| = k >= 1;
/// the constant term is excluded throughout.
class ChaosFamily {
 public:
  virtual ~ChaosFamily() = default;
  virtual std::string name() const = 0;
  virtual int horizon() const = 0;
  virtual double total_mass() const = 0;
  virtual double mass_by_order(int k) const = 0;
  /// Certified bound on sum_{k > K} C^k m_k (infinite when it may diverge).
  double tail_bound(int K, double C = 1.0) const { return weighted_tail(K, C); }
  virtual double box_mass(const TimeBox& b) const = 0;
  /// sup_t Inf_t, or a certified upper bound where the sup is not tractable.
  virtual double influence_sup() const = 0;
  /// Ratio of the geometric order envelope m_k <= a x^k (0 if finite order).
  virtual double envelope_ratio() const = 0;

 protected:
  virtual double weighted_tail(int K, double C) const = 0;
};

/// Smallest K with geometric tail x^(K+1)/(1 - x) below tol.
inline int default_order_cutoff(double x, double tol = 1e-10) {
  if (!(x < 1)) throw DivergenceError("order envelope ratio >= 1: no certified tail");
  if (x <= 0) return 1;
  int K = 1;
  while (std::pow(x, K + 1) / (1 - x) >= tol && K < 10000) ++K;
  return K;
}

namespace detail {

inline double geometric_tail(double a, double x, int K, double C) {
  const double r = C * x;
  if (a == 0 || x == 0) return 0.0;
  if (!(r < 1)) return std::numeric_limits<double>::infinity();
  return a * std::pow(r, K + 1) / (1 - r);
}

/// Upper bound on sup_x of the mass of chains from the origin ending at (n, x),
/// for n = 0..N, from f(n) = s_n^2 + sigma^2 sum_{m<n} f(m) u_{n-m},
/// s_n = max_x q_n(x).
inline std::vector<double> chain_end_sup_bound(int N, double sigma) {
  const auto u = collision_weights(N);
  const double s2 = sigma * sigma;
  std::vector<double> f(std::size_t(N) + 1, 0.0);
  for (int n = 1; n <= N; ++n) {
    CompensatedSum s;
    for (int m = 1; m < n; ++m) s.add(f[std::size_t(m)] * u[std::size_t(n - m)]);
    f[std::size_t(n)] = sq(rw_kernel_2d(n, {n & 1, 0})) + s2 * s.value();
  }
  return f;
}

/// sup over space-time indices of the chain mass through them, for chaos
/// started at the origin with horizon N.
inline double z_influence_bound(int N, double sigma) {
  const auto e2 = second_moment_Z_curve(N, sigma);
  const auto f = chain_end_sup_bound(N, sigma);
  double best = 0;
  for (int n = 1; n <= N; ++n) best = std::max(best, sigma * sigma * f[std::size_t(n)] * e2[std::size_t(N - n)]);
  return best;
}

/// a_k(L): order-k chain mass with all times in 1..L, for k = 0..K, L = 0..N.
inline std::vector<std::vector<double>> order_mass_curves(int N, double sigma, int K) {
  const auto u = collision_weights(N);
  const double s2 = sigma * sigma;
  std::vector<std::vector<double>> a(std::size_t(K) + 1, std::vector<double>(std::size_t(N) + 1, 0.0));
  std::fill(a[0].begin(), a[0].end(), 1.0);
  // a_k(L) = sum_{n=1}^{L} sigma^2 u_n a_{k-1}(L - n).
  for (int k = 1; k <= K; ++k)
    for (int L = 1; L <= N; ++L) {
      CompensatedSum s;
      for (int n = 1; n <= L; ++n) s.add(u[std::size_t(n)] * a[std::size_t(k - 1)][std::size_t(L - n)]);
      a[std::size_t(k)][std::size_t(L)] = s2 * s.value();
    }
  return a;
}

}  // namespace detail

/// Order-resolved dominated mass: chains with first time n_1 in [lo, hi],
/// later gaps <= n_1 and all times <= horizon; entries k = 0..K (0 unused).
inline std::vector<double> dominated_order_masses(int lo, int hi, int horizon, double sigma, int K) {
  detail::check_moment_args(horizon, sigma);
  if (K < 1) throw DomainError("K must be >= 1");
  lo = std::max(lo, 1);
  hi = std::min(hi, horizon);
  std::vector<double> m(std::size_t(K) + 1, 0.0);
  if (lo > hi) return m;
  const auto u = detail::collision_weights(horizon);
  const double s2 = sigma * sigma;
  std::vector<CompensatedSum> acc(std::size_t(K) + 1);
  // G[L][j]: continuation chains with j more points, gaps <= c, length <= L.
  std::vector<std::vector<double>> G;
  for (int c = lo; c <= hi; ++c) {
    const int Lmax = horizon - c;
    G.assign(std::size_t(Lmax) + 1, std::vector<double>(std::size_t(K), 0.0));
    for (int L = 0; L <= Lmax; ++L) {
      G[std::size_t(L)][0] = 1.0;
      for (int j = 1; j < K; ++j) {
        CompensatedSum s;
        for (int g = 1; g <= std::min(c, L); ++g) s.add(u[std::size_t(g)] * G[std::size_t(L - g)][std::size_t(j - 1)]);
        G[std::size_t(L)][std::size_t(j)] = s2 * s.value();
      }
    }
    for (int k = 1; k <= K; ++k) acc[std::size_t(k)].add(s2 * u[std::size_t(c)] * G[std::size_t(Lmax)][std::size_t(k - 1)]);
  }
  for (int k = 1; k <= K; ++k) m[std::size_t(k)] = acc[std::size_t(k)].value();
  return m;
}

// ---------------------------------------------------------------------------
// Families

/// A chaos over indices 1..m given term by term; the index is its own time.
class ExplicitFamily : public ChaosFamily {
 public:
  struct Term {
    std::vector<int> subset;
    double coef = 0;
  };

  ExplicitFamily(int m, std::vector<Term> terms) : m_(m), terms_(std::move(terms)) {
    for (auto& t : terms_) {
      std::sort(t.subset.begin(), t.subset.end());
      if (t.subset.empty()) throw DomainError("explicit family: the constant term is excluded");
      if (std::adjacent_find(t.subset.begin(), t.subset.end()) != t.subset.end())
        throw DomainError("explicit family: repeated index");
      if (t.subset.front() < 1 || t.subset.back() > m) throw DomainError("explicit family: index out of range");
    }
  }

  std::string name() const override { return "explicit"; }
  int horizon() const override { return m_; }
  const std::vector<Term>& terms() const { return terms_; }

  double total_mass() const override {
    CompensatedSum s;
    for (const auto& t : terms_) s.add(t.coef * t.coef);
    return s.value();
  }
  double mass_by_order(int k) const override {
    CompensatedSum s;
    for (const auto& t : terms_)
      if (int(t.subset.size()) == k) s.add(t.coef * t.coef);
    return s.value();
  }
  double weighted_tail(int K, double C) const override {
    CompensatedSum s;
    for (const auto& t : terms_)
      if (int(t.subset.size()) > K) s.add(std::pow(C, double(t.subset.size())) * t.coef * t.coef);
    return s.value();
  }
  double box_mass(const TimeBox& b) const override {
    CompensatedSum s;
    for (const auto& t : terms_)
      if (t.subset.front() >= b.first && t.subset.back() <= b.last) s.add(t.coef * t.coef);
    return s.value();
  }
  double influence(int idx) const {
    CompensatedSum s;
    for (const auto& t : terms_)
      if (std::binary_search(t.subset.begin(), t.subset.end(), idx)) s.add(t.coef * t.coef);
    return s.value();
  }
  double influence_sup() const override {
    double best = 0;
    for (int i = 1; i <= m_; ++i) best = std::max(best, influence(i));
    return best;
  }
  double envelope_ratio() const override { return 0.0; }

 private:
  int m_;
  std::vector<Term> terms_;
};

/// Z_N - 1 for the point-to-plane partition function from the origin.
class ZChaosFamily : public ChaosFamily {
 public:
  ZChaosFamily(int N, double sigma)
      : N_(N), sigma_(sigma), e2_(second_moment_Z_curve(N, sigma)),
        x_(sigma * sigma * overlap_sum(N).r_at(N)) {}

  std::string name() const override { return "z_chaos"; }
  int horizon() const override { return N_; }
  double total_mass() const override { return e2_.back() - 1.0; }
  double mass_by_order(int k) const override {
    if (k < 1) throw DomainError("order must be >= 1");
    if (k >= int(orders_.size())) orders_ = order_masses_Z(N_, sigma_, std::max(k, 2 * int(orders_.size())));
    return orders_[std::size_t(k)];
  }
  double weighted_tail(int K, double C) const override { return detail::geometric_tail(1.0, x_, K, C); }
  double box_mass(const TimeBox& b) const override {
    const int lo = std::max(b.first, 1), hi = std::min(b.last, N_);
    if (lo > hi) return 0.0;
    const auto u = detail::collision_weights(hi);
    CompensatedSum s;
    for (int n = lo; n <= hi; ++n) s.add(u[std::size_t(n)] * e2_[std::size_t(hi - n)]);
    return sigma_ * sigma_ * s.value();
  }
  double influence_sup() const override { return detail::z_influence_bound(N_, sigma_); }
  double envelope_ratio() const override { return x_; }

 private:
  int N_;
  double sigma_;
  std::vector<double> e2_;
  double x_;
  mutable std::vector<double> orders_;
};

/// The dominated chaos: chains whose later gaps never exceed the first time.
class XdomFamily : public ChaosFamily {
 public:
  XdomFamily(int N, double sigma) : N_(N), sigma_(sigma), x_(sigma * sigma * overlap_sum(N).r_at(N)) {}

  std::string name() const override { return "xdom"; }
  int horizon() const override { return N_; }
  double total_mass() const override { return second_moment_xdom(N_, sigma_); }
  double mass_by_order(int k) const override {
    if (k < 1) throw DomainError("order must be >= 1");
    if (k >= int(orders_.size()))
      orders_ = dominated_order_masses(1, N_, N_, sigma_, std::max(k, 2 * int(orders_.size())));
    return orders_[std::size_t(k)];
  }
  double weighted_tail(int K, double C) const override { return detail::geometric_tail(1.0, x_, K, C); }
  double box_mass(const TimeBox& b) const override {
    if (b.empty()) return 0.0;
    return dominated_mass(b.first, std::min(b.last, N_), std::min(b.last, N_), sigma_);
  }
  /// Bounded by the influence in the full chaos, which contains every dominated chain.
  double influence_sup() const override { return detail::z_influence_bound(N_, sigma_); }
  double envelope_ratio() const override { return x_; }

 private:
  int N_;
  double sigma_;
  double x_;
  mutable std::vector<double> orders_;
};

/// mu <W, psi> + lambda <Xi, psi> for the rescaled noise W and the singular
/// product Xi = (noise) x (Z - 1).
class SingularFamily : public ChaosFamily {
 public:
  SingularFamily(PsiTable psi, int N, double sigma, double mu, double lambda)
      : psi_(std::move(psi)), N_(N), sigma_(sigma), mu_(mu), lambda_(lambda),
        e2_(second_moment_Z_curve(N, sigma)), x_(sigma * sigma * overlap_sum(N).r_at(N)) {
    if (psi_.horizon() != N) throw DomainError("psi table built for a different N");
    slice_.assign(std::size_t(N) + 1, 0.0);
    for (int n = psi_.n_lo(); n <= psi_.n_hi(); ++n) {
      CompensatedSum s;
      psi_.for_each(n, [&](Site, double v) {
        s.add(v * v);
        max_sq_ = std::max(max_sq_, v * v);
      });
      slice_[std::size_t(n)] = s.value() / (double(N) * N);
    }
  }

  std::string name() const override { return "singular"; }
  int horizon() const override { return N_; }
  double total_mass() const override { return box_mass({1, N_}); }
  double mass_by_order(int k) const override {
    if (k < 1) throw DomainError("order must be >= 1");
    CompensatedSum s;
    if (k == 1) {
      for (double v : slice_) s.add(v);
      return mu_ * mu_ * s.value();
    }
    if (k > int(curves_.size()))
      curves_ = detail::order_mass_curves(N_, sigma_, std::max(k - 1, 2 * int(curves_.size())));
    for (int n = 1; n <= N_; ++n) s.add(slice_[std::size_t(n)] * curves_[std::size_t(k - 1)][std::size_t(N_ - n)]);
    return lambda_ * lambda_ * s.value();
  }
  double weighted_tail(int K, double C) const override {
    // Order k >= 2 carries lambda^2 |psibar|^2 times an order-(k-1) mass <= x^(k-1).
    CompensatedSum s;
    for (double v : slice_) s.add(v);
    const double a = lambda_ * lambda_ * s.value() / (x_ > 0 ? x_ : 1.0);
    const double lead = K >= 1 ? 0.0 : C * mu_ * mu_ * s.value();
    if (x_ == 0) return lead;
    return lead + detail::geometric_tail(a, x_, std::max(K, 1), C);
  }
  double box_mass(const TimeBox& b) const override {
    const int lo = std::max(b.first, 1), hi = std::min(b.last, N_);
    CompensatedSum s;
    for (int n = lo; n <= hi; ++n)
      s.add(slice_[std::size_t(n)] * (mu_ * mu_ + lambda_ * lambda_ * (e2_[std::size_t(hi - n)] - 1.0)));
    return s.value();
  }
  /// Certified: max psibar^2 / N^2 [mu^2 + lambda^2 (E Z^2 - 1)(1 + E Z^2)].
  double influence_sup() const override {
    const double e = e2_.back();
    return max_sq_ / (double(N_) * N_) * (mu_ * mu_ + lambda_ * lambda_ * (e - 1.0) * (1.0 + e));
  }
  double envelope_ratio() const override { return x_; }

 private:
  PsiTable psi_;
  int N_;
  double sigma_, mu_, lambda_;
  std::vector<double> e2_;
  double x_;
  std::vector<double> slice_;
  double max_sq_ = 0;
  mutable std::vector<std::vector<double>> curves_;
};

// ---------------------------------------------------------------------------
// Report and bounds

struct CriterionReport {
  std::string family;
  int N = 0;
  int K = 0;
  double total_mass = 0;
  std::vector<double> order_masses;  // k = 1..K
  double tail_bound = 0;             // certified bound on sum_{k > K}
  BoxPartition boxes;
  std::vector<double> box_masses;
  double box_sum = 0;
  double max_box = 0;
  double delta = 0;  // total - box_sum
  double max_influence = 0;
  // Finite-N flags, one per condition; none of them is a limit verdict.
  bool second_moment_finite = false;  // 0 < total < inf
  bool tail_certified = false;        // orders <= K plus tail bound account for the total
  bool boxes_within_total = false;    // delta >= -1e-9
};

inline double influence_max(const ChaosFamily& f) { return f.influence_sup(); }

inline double delta_uncovered(const ChaosFamily& f, const BoxPartition& boxes) {
  check_disjoint(boxes);
  CompensatedSum s;
  for (const auto& b : boxes) s.add(f.box_mass(b));
  return f.total_mass() - s.value();
}

/// Fills every report field from the family. K = 0 picks the default cutoff.
inline CriterionReport criterion_report(const ChaosFamily& f, const BoxPartition& boxes, int K = 0) {
  check_disjoint(boxes);
  CriterionReport r;
  r.family = f.name();
  r.N = f.horizon();
  r.K = K > 0 ? K : std::max(1, default_order_cutoff(f.envelope_ratio()));
  r.total_mass = f.total_mass();
  CompensatedSum orders;
  for (int k = 1; k <= r.K; ++k) {
    r.order_masses.push_back(f.mass_by_order(k));
    orders.add(r.order_masses.back());
  }
  r.tail_bound = f.tail_bound(r.K);
  r.boxes = boxes;
  CompensatedSum bs;
  for (const auto& b : boxes) {
    r.box_masses.push_back(f.box_mass(b));
    bs.add(r.box_masses.back());
    r.max_box = std::max(r.max_box, r.box_masses.back());
  }
  r.box_sum = bs.value();
  r.delta = r.total_mass - r.box_sum;
  r.max_influence = f.influence_sup();
  r.second_moment_finite = r.total_mass > 0 && std::isfinite(r.total_mass);
  const double gap = r.total_mass - orders.value();
  r.tail_certified = gap >= -1e-9 && gap <= r.tail_bound + 1e-9;
  r.boxes_within_total = r.delta >= -1e-9;
  return r;
}

/// C_f {2 sqrt(C_gt) + 16 K^2 C_le m2 + 70^(K+1) C_le L^(3K) sqrt(max_inf)}.
inline double lindeberg_bound(double C_f, int K, double L, double m2, double C_le, double C_gt, double max_inf) {
  if (C_f < 0 || K < 0 || L < 0 || m2 < 0 || C_le < 0 || C_gt < 0 || max_inf < 0)
    throw DomainError("lindeberg_bound: inputs must be >= 0");
  if (m2 > 0.25) throw DomainError("lindeberg_bound: requires m2 <= 1/4");
  const double k = K;
  return C_f * (2 * std::sqrt(C_gt) + 16 * k * k * C_le * m2 +
                std::pow(70.0, k + 1) * C_le * std::pow(L, 3 * k) * std::sqrt(max_inf));
}

/// (sum_k C_p^k m_k)^(p/2) with masses[k] the order-k mass (masses[0] = constant term).
inline double hypercontractive_bound(const std::vector<double>& masses, double p, double C_p) {
  if (!(p > 2)) throw DomainError("hypercontractive_bound: need p > 2");
  if (!(C_p >= 1)) throw DomainError("hypercontractive_bound: need C_p >= 1");
  CompensatedSum s;
  for (std::size_t k = 0; k < masses.size(); ++k) {
    if (!(masses[k] >= 0)) throw DomainError("hypercontractive_bound: masses must be >= 0");
    s.add(std::pow(C_p, double(k)) * masses[k]);
  }
  const double v = s.value();
  if (!std::isfinite(v)) throw DivergenceError("hypercontractive_bound: weighted sum diverges");
  return std::pow(v, p / 2);
}

/// The same bound for a family, tabulated to order K plus the certified tail.
inline double hypercontractive_bound(const ChaosFamily& f, double p, double C_p, int K) {
  std::vector<double> m(std::size_t(K) + 1, 0.0);
  for (int k = 1; k <= K; ++k) m[std::size_t(k)] = f.mass_by_order(k);
  const double tail = f.tail_bound(K, C_p);
  if (!std::isfinite(tail)) throw DivergenceError("hypercontractive_bound: C_p x >= 1, tail diverges");
  const double head = hypercontractive_bound(m, p, C_p);
  return std::pow(std::pow(head, 2 / p) + tail, p / 2);
}

}  // namespace dpchaos

#endif  // DPCHAOS_CLT_CRITERION_HPP
