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

// Disorder laws, the coupling schedule and the sampled environment.
//
// The environment is a field of i.i.d. variables omega(n, x) with mean 0 and
// variance 1. Its tilt
//
//   eta(n, x) = (exp(beta omega - lambda(beta)) - 1) / sigma
//
// is centred with unit variance, and 1 + sigma eta is the Boltzmann weight.

#ifndef DPCHAOS_DISORDER_HPP
#define DPCHAOS_DISORDER_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "dpchaos/common.hpp"
#include "dpchaos/rng.hpp"
#include "dpchaos/walk_kernels.hpp"

namespace dpchaos {

enum class LawKind { kGaussian, kRademacher, kDiscreteTable };

inline const char* law_name(LawKind k) {
  switch (k) {
    case LawKind::kGaussian: return "gaussian";
    case LawKind::kRademacher: return "rademacher";
    case LawKind::kDiscreteTable: return "discrete-table";
  }
  return "?";
}

class DisorderLaw {
 public:
  static DisorderLaw gaussian() { return DisorderLaw(LawKind::kGaussian); }
  static DisorderLaw rademacher() { return DisorderLaw(LawKind::kRademacher, {-1.0, 1.0}, {0.5, 0.5}); }

  /// A finitely supported law. Must be centred with unit variance.
  static DisorderLaw discrete(std::vector<double> values, std::vector<double> probs) {
    if (values.empty() || values.size() != probs.size())
      throw DomainError("discrete law: values and probabilities must be non-empty and aligned");
    double total = 0, mean = 0, second = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!(probs[i] > 0) || !std::isfinite(values[i]))
        throw DomainError("discrete law: probabilities must be positive, values finite");
      total += probs[i];
      mean += probs[i] * values[i];
      second += probs[i] * values[i] * values[i];
    }
    if (std::abs(total - 1) > 1e-12 || std::abs(mean) > 1e-12 || std::abs(second - 1) > 1e-12)
      throw DomainError("discrete law: need total mass 1, mean 0, variance 1");
    return DisorderLaw(LawKind::kDiscreteTable, std::move(values), std::move(probs));
  }

  static DisorderLaw from_name(const std::string& name) {
    if (name == "gaussian") return gaussian();
    if (name == "rademacher") return rademacher();
    throw DomainError("unknown disorder law '" + name + "'");
  }

  LawKind kind() const { return kind_; }
  const char* name() const { return law_name(kind_); }
  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& probs() const { return probs_; }

  /// lambda(beta) = log E[exp(beta omega)].
  double cgf(double beta) const {
    if (!std::isfinite(beta)) throw DomainError("cgf: beta must be finite");
    switch (kind_) {
      case LawKind::kGaussian: return 0.5 * beta * beta;
      case LawKind::kRademacher: {
        const double a = std::abs(beta);
        if (a < 20) return std::log1p(2 * sq(std::sinh(0.5 * a)));
        return a + std::log1p(std::exp(-2 * a)) - std::log(2.0);
      }
      case LawKind::kDiscreteTable: {
        double top = -INFINITY;
        for (double v : values_) top = std::max(top, beta * v);
        double s = 0, mass = 0;
        for (std::size_t i = 0; i < values_.size(); ++i) {
          s += probs_[i] * std::exp(beta * values_[i] - top);
          mass += probs_[i];
        }
        return top + std::log(s / mass);
      }
    }
    return 0;
  }

  /// Draws omega from the attempt-0 bits of a site (continuing with fresh
  /// counters when the Gaussian sampler rejects).
  double draw(const PhiloxKey& key, const SiteCounter& site, SiteBits first) const {
    switch (kind_) {
      case LawKind::kGaussian: return site_normal(key, site, first);
      case LawKind::kRademacher:
      case LawKind::kDiscreteTable: return values_[table_index(first)];
    }
    return 0;
  }

  /// Index of the table value selected by the attempt-0 bits.
  std::size_t table_index(SiteBits first) const {
    if (kind_ == LawKind::kRademacher) return (first.lo & 1u) ? 1 : 0;
    double u = open_unit(join64(first.lo, first.hi));
    for (std::size_t i = 0; i + 1 < probs_.size(); ++i) {
      if (u < probs_[i]) return i;
      u -= probs_[i];
    }
    return probs_.size() - 1;
  }

 private:
  explicit DisorderLaw(LawKind k, std::vector<double> v = {}, std::vector<double> p = {})
      : kind_(k), values_(std::move(v)), probs_(std::move(p)) {}

  LawKind kind_;
  std::vector<double> values_;
  std::vector<double> probs_;
};

inline double cgf(const DisorderLaw& law, double beta) { return law.cgf(beta); }

struct CouplingSchedule {
  double beta_hat = 0;
  int N = 0;
  double R_N = 0;
  double beta_N = 0;
  double lambda = 0;  ///< lambda(beta_N)
  double sigma_N = 0;

  double sigma2() const { return sigma_N * sigma_N; }
  /// sigma_N^2 R_N; the second moment of Z stays bounded iff this is < 1.
  double effective_strength() const { return sigma2() * R_N; }
};

inline CouplingSchedule make_schedule(double beta_hat, int N, const DisorderLaw& law) {
  if (!(beta_hat > 0 && beta_hat < 1))
    throw DomainError("make_schedule: beta_hat must lie in (0, 1)");
  if (N < 1) throw DomainError("make_schedule: N must be >= 1");
  CouplingSchedule s;
  s.beta_hat = beta_hat;
  s.N = N;
  s.R_N = overlap_sum(N).r_at(N);
  s.beta_N = beta_hat / std::sqrt(s.R_N);
  s.lambda = law.cgf(s.beta_N);
  s.sigma_N = std::sqrt(std::expm1(law.cgf(2 * s.beta_N) - 2 * s.lambda));
  return s;
}

/// Schedule with a prescribed coupling, bypassing the beta_hat relation.
/// Used for small-N identity checks and the no-disorder limit.
inline CouplingSchedule fixed_schedule(double beta, int N, const DisorderLaw& law) {
  if (!(beta >= 0) || N < 1) throw DomainError("fixed_schedule: need beta >= 0 and N >= 1");
  CouplingSchedule s;
  s.N = N;
  s.R_N = overlap_sum(N).r_at(N);
  s.beta_N = beta;
  s.beta_hat = beta * std::sqrt(s.R_N);
  s.lambda = law.cgf(beta);
  s.sigma_N = beta == 0 ? 0.0 : std::sqrt(std::expm1(law.cgf(2 * beta) - 2 * s.lambda));
  return s;
}

/// One realization of the environment on {1..N} x box.
class DisorderPlane {
 public:
  DisorderPlane(std::uint64_t master_seed, std::uint32_t sample_index, DisorderLaw law,
                CouplingSchedule schedule, int box_radius)
      : seed_(master_seed),
        sample_(sample_index),
        key_(philox_key(master_seed)),
        law_(std::move(law)),
        sched_(schedule),
        box_(box_radius) {
    if (schedule.N < 1 || std::uint32_t(schedule.N) > kMaxTime)
      throw DomainError("DisorderPlane: horizon out of range");
    if (box_radius < 1) throw DomainError("DisorderPlane: box radius must be >= 1");
    if (law_.kind() != LawKind::kGaussian) {
      for (double v : law_.values()) table_weight_.push_back(std::exp(tilt_arg(v)));
    }
  }

  std::uint64_t master_seed() const { return seed_; }
  std::uint32_t sample_index() const { return sample_; }
  const DisorderLaw& law() const { return law_; }
  const CouplingSchedule& schedule() const { return sched_; }
  int horizon() const { return sched_.N; }
  int box_radius() const { return box_; }
  bool in_domain(int n, Site z) const {
    return n >= 1 && n <= sched_.N && z.linf() <= box_;
  }

  double sample_omega(int n, Site z) const {
    check(n, z);
    const SiteCounter c{std::uint32_t(n), z.x1, z.x2, sample_};
    return law_.draw(key_, c, site_bits(key_, c));
  }

  /// Boltzmann weight exp(beta omega - lambda) = 1 + sigma eta at one site.
  double sample_weight(int n, Site z) const {
    check(n, z);
    const SiteCounter c{std::uint32_t(n), z.x1, z.x2, sample_};
    const SiteBits bits = site_bits(key_, c);
    if (law_.kind() != LawKind::kGaussian) return table_weight_[law_.table_index(bits)];
    alignas(64) double w[8] = {};
    w[0] = site_normal(key_, c, bits);
    exp_tilt8(w);
    return w[0];
  }

  double sample_eta(int n, Site z) const { return eta_of_weight(sample_weight(n, z)); }

  double eta_of_weight(double w) const {
    return sched_.sigma_N == 0 ? 0.0 : (w - 1.0) / sched_.sigma_N;
  }

  /// Weights at `count` sites z0, z0 + step, z0 + 2 step, ... at time n;
  /// bit-identical to sample_weight at each site. Rows along step (1, -1)
  /// take the batched path.
  void fill_weights(int n, Site z0, Site step, int count, double* out) const {
    if (count <= 0) return;
    check(n, z0);
    check(n, {z0.x1 + (count - 1) * step.x1, z0.x2 + (count - 1) * step.x2});
    constexpr int kLane = 64;
    alignas(64) std::uint32_t lo_buf[kLane + 33], hi_buf[kLane + 33];
    alignas(64) double buf[kLane];
    const bool diagonal = step.x1 == 1 && step.x2 == -1;
    for (int base = 0; base < count; base += kLane) {
      const int len = std::min(kLane, count - base);
      const int x1 = z0.x1 + base * step.x1, x2 = z0.x2 + base * step.x2;
      std::uint32_t* lo = lo_buf;
      std::uint32_t* hi = hi_buf;
      if (diagonal) {
        const int off = diagonal_bits(key_, std::uint32_t(n), x1, x2, sample_, len, lo, hi);
        lo += off;
        hi += off;
      } else {
        for (int l = 0; l < len; ++l) {
          const SiteBits b = site_bits(
              key_, {std::uint32_t(n), x1 + l * step.x1, x2 + l * step.x2, sample_});
          lo[l] = b.lo;
          hi[l] = b.hi;
        }
      }
      if (law_.kind() != LawKind::kGaussian) {
        for (int l = 0; l < len; ++l)
          out[base + l] = table_weight_[law_.table_index(SiteBits{lo[l], hi[l]})];
        continue;
      }
      normal_lanes(key_, std::uint32_t(n), x1, step.x1, x2, step.x2, sample_, len, lo, hi, buf);
      const int padded = (len + 7) & ~7;
      std::fill(buf + len, buf + padded, 0.0);
      for (int l = 0; l < padded; l += 8) exp_tilt8(buf + l);
      std::copy(buf, buf + len, out + base);
    }
  }

  void fill_eta(int n, Site z0, Site step, int count, double* out) const {
    fill_weights(n, z0, step, count, out);
    for (int l = 0; l < count; ++l) out[l] = eta_of_weight(out[l]);
  }

 private:
  double tilt_arg(double omega) const { return sched_.beta_N * omega - sched_.lambda; }

  /// In place: omega -> exp(beta omega - lambda) on 8 lanes. Always runs the
  /// same packet code so a site's weight does not depend on its lane.
  void exp_tilt8(double* v) const {
    for (int l = 0; l < 8; ++l) v[l] = sched_.beta_N * v[l] - sched_.lambda;
    detail::exp8(v);
  }

  void check(int n, Site z) const {
    if (!in_domain(n, z))
      throw DomainError("disorder query outside the plane (n=" + std::to_string(n) + ", z=(" +
                        std::to_string(z.x1) + "," + std::to_string(z.x2) + "))");
  }

  std::uint64_t seed_;
  std::uint32_t sample_;
  PhiloxKey key_;
  DisorderLaw law_;
  CouplingSchedule sched_;
  int box_;
  std::vector<double> table_weight_;
};

}  // namespace dpchaos

#endif  // DPCHAOS_DISORDER_HPP
