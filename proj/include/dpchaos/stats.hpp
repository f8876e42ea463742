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

// Sample statistics, Gaussian targets, Kolmogorov-Smirnov tests and the
// Edwards-Wilkinson covariance of paired test functions.

#ifndef DPCHAOS_STATS_HPP
#define DPCHAOS_STATS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/legendre.hpp>

#include "dpchaos/chaos_exact.hpp"
#include "dpchaos/common.hpp"
#include "dpchaos/polymer_sim.hpp"
#include "dpchaos/walk_kernels.hpp"

namespace dpchaos {

// ---------------------------------------------------------------------------
// Targets

struct GaussianTarget {
  double mean = 0;
  double variance = 1;
};

/// 2x2 covariance of a centred Gaussian pair.
struct PairTarget {
  std::array<double, 2> mean{0, 0};
  std::array<std::array<double, 2>, 2> cov{};
};

inline void check_beta_hat(double beta_hat) {
  if (!(beta_hat > 0 && beta_hat < 1)) throw DomainError("beta_hat must lie in (0, 1)");
}

/// log 1/(1 - beta_hat^2).
inline double sigma2_beta_hat(double beta_hat) {
  check_beta_hat(beta_hat);
  return -std::log1p(-beta_hat * beta_hat);
}

/// c^2 = 1/(1 - beta_hat^2).
inline double c2_beta_hat(double beta_hat) {
  check_beta_hat(beta_hat);
  return 1.0 / (1.0 - beta_hat * beta_hat);
}

/// Limit law of log Z: N(-s/2, s) with s = log 1/(1 - beta_hat^2).
inline GaussianTarget lognormal_target(double beta_hat) {
  const double s = sigma2_beta_hat(beta_hat);
  return {-0.5 * s, s};
}

/// Finite-N reference for Var(log Z): log E[Z^2], exact for a mean-one lognormal.
inline double lognormal_finite_variance(int N, double sigma) { return std::log(second_moment_Z(N, sigma)); }

/// Joint limit of (<W, psi>, <Xi, psi>): independent, variances |psi|^2 (1, c^2 - 1).
inline PairTarget singular_target(double beta_hat, double psi_l2) {
  check_beta_hat(beta_hat);
  if (!(psi_l2 > 0)) throw DomainError("singular_target: |psi|^2 must be positive");
  PairTarget t;
  t.cov[0][0] = psi_l2;
  t.cov[1][1] = psi_l2 * beta_hat * beta_hat / (1.0 - beta_hat * beta_hat);
  return t;
}

// ---------------------------------------------------------------------------
// Sample summaries

/// One observable over a batch, with the sample ids that produced it.
struct SampleBatch {
  std::string tag;
  std::vector<double> values;
  std::vector<std::uint64_t> ids;
  int N = 0;
  double beta_hat = 0;
  std::string digest;

  void validate() const {
    if (values.size() < 2) throw DomainError("batch '" + tag + "' needs at least 2 values");
    if (!ids.empty()) {
      if (ids.size() != values.size()) throw DomainError("batch '" + tag + "': ids and values differ in length");
      if (std::set<std::uint64_t>(ids.begin(), ids.end()).size() != ids.size())
        throw DomainError("batch '" + tag + "': repeated sample ids");
    }
  }
};

struct Estimate {
  double value = 0;
  double se = 0;
};

struct MomentsSummary {
  std::size_t n = 0;
  Estimate mean, variance, skewness;
};

namespace detail {

inline double mean_of(const std::vector<double>& x) {
  CompensatedSum s;
  for (double v : x) s.add(v);
  return s.value() / double(x.size());
}

/// Jackknife standard error from leave-one-out estimates.
inline double jackknife_se(const std::vector<double>& loo) {
  const double n = double(loo.size());
  const double m = mean_of(loo);
  CompensatedSum s;
  for (double v : loo) s.add((v - m) * (v - m));
  return std::sqrt((n - 1) / n * s.value());
}

}  // namespace detail

/// Mean, unbiased variance and skewness with jackknife standard errors.
inline MomentsSummary moments_summary(const std::vector<double>& x) {
  const std::size_t n = x.size();
  if (n < 3) throw DomainError("moments_summary: need at least 3 values");
  const double c = detail::mean_of(x);
  CompensatedSum s1, s2, s3;
  for (double v : x) {
    const double d = v - c;
    s1.add(d);
    s2.add(d * d);
    s3.add(d * d * d);
  }
  auto stats = [](double k, double t1, double t2, double t3) {
    const double m = t1 / k;
    const double m2 = t2 / k - m * m;
    const double m3 = t3 / k - 3 * m * t2 / k + 2 * m * m * m;
    return std::array<double, 3>{m, m2 * k / (k - 1), m2 > 0 ? m3 / std::pow(m2, 1.5) : 0.0};
  };
  const auto full = stats(double(n), s1.value(), s2.value(), s3.value());
  if (!(full[1] > 0)) throw DomainError("moments_summary: zero variance");
  std::vector<double> lm(n), lv(n), ls(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x[i] - c;
    const auto loo = stats(double(n - 1), s1.value() - d, s2.value() - d * d, s3.value() - d * d * d);
    lm[i] = loo[0];
    lv[i] = loo[1];
    ls[i] = loo[2];
  }
  MomentsSummary r;
  r.n = n;
  r.mean = {c + full[0], detail::jackknife_se(lm)};
  r.variance = {full[1], detail::jackknife_se(lv)};
  r.skewness = {full[2], detail::jackknife_se(ls)};
  return r;
}

/// Sample covariance matrix of a pair with jackknife standard errors.
struct CovarianceSummary {
  std::size_t n = 0;
  std::array<std::array<Estimate, 2>, 2> cov;
  double correlation = 0;
};

inline CovarianceSummary empirical_cov(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 3 || y.size() != n) throw DomainError("empirical_cov: need two aligned batches of length >= 3");
  const std::array<const std::vector<double>*, 2> v{&x, &y};
  const std::array<double, 2> c{detail::mean_of(x), detail::mean_of(y)};
  CovarianceSummary r;
  r.n = n;
  for (int a = 0; a < 2; ++a)
    for (int b = a; b < 2; ++b) {
      const auto& p = *v[std::size_t(a)];
      const auto& q = *v[std::size_t(b)];
      CompensatedSum sp, sq_, spq;
      for (std::size_t i = 0; i < n; ++i) {
        const double dp = p[i] - c[std::size_t(a)], dq = q[i] - c[std::size_t(b)];
        sp.add(dp);
        sq_.add(dq);
        spq.add(dp * dq);
      }
      auto cov = [](double k, double tp, double tq, double tpq) { return (tpq - tp * tq / k) / (k - 1); };
      std::vector<double> loo(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double dp = p[i] - c[std::size_t(a)], dq = q[i] - c[std::size_t(b)];
        loo[i] = cov(double(n - 1), sp.value() - dp, sq_.value() - dq, spq.value() - dp * dq);
      }
      const Estimate e{cov(double(n), sp.value(), sq_.value(), spq.value()), detail::jackknife_se(loo)};
      r.cov[std::size_t(a)][std::size_t(b)] = e;
      r.cov[std::size_t(b)][std::size_t(a)] = e;
    }
  if (!(r.cov[0][0].value > 0 && r.cov[1][1].value > 0)) throw DomainError("empirical_cov: zero variance");
  r.correlation = r.cov[0][1].value / std::sqrt(r.cov[0][0].value * r.cov[1][1].value);
  return r;
}

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov

/// P(D_n < d) for the one-sample two-sided statistic (Marsaglia, Tsang and
/// Wang), with their tail approximation where the matrix power is not needed.
inline double kolmogorov_cdf(int n, double d) {
  if (n < 1) throw DomainError("kolmogorov_cdf: n must be >= 1");
  if (d <= 0) return 0.0;
  if (d >= 1) return 1.0;
  const double s = d * d * n;
  if (s > 7.24 || (s > 3.76 && n > 99))
    return 1 - 2 * std::exp(-(2.000071 + 0.331 / std::sqrt(double(n)) + 1.409 / n) * s);
  const int k = int(n * d) + 1, m = 2 * k - 1;
  const double h = k - n * d;
  Eigen::MatrixXd H(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) H(i, j) = i - j + 1 < 0 ? 0.0 : 1.0;
  for (int i = 0; i < m; ++i) {
    H(i, 0) -= std::pow(h, i + 1);
    H(m - 1, i) -= std::pow(h, m - i);
  }
  H(m - 1, 0) += 2 * h - 1 > 0 ? std::pow(2 * h - 1, m) : 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      if (i - j + 1 > 0)
        for (int g = 1; g <= i - j + 1; ++g) H(i, j) /= g;
  // Q = H^n with a decimal exponent carried alongside.
  Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(m, m), P = H;
  int eq = 0, ep = 0;
  for (int e = n;;) {
    if (e & 1) {
      Q = (Q * P).eval();
      eq += ep;
      if (Q(k - 1, k - 1) > 1e140) {
        Q *= 1e-140;
        eq += 140;
      }
    }
    e >>= 1;
    if (!e) break;
    P = (P * P).eval();
    ep *= 2;
    if (P(k - 1, k - 1) > 1e140) {
      P *= 1e-140;
      ep += 140;
    }
  }
  double v = Q(k - 1, k - 1);
  for (int i = 1; i <= n; ++i) {
    v = v * i / n;
    if (v < 1e-140) {
      v *= 1e140;
      eq -= 140;
    }
  }
  return v * std::pow(10.0, eq);
}

/// Limiting survival function P(sqrt(n) D_n > lambda) = 2 sum (-1)^(k-1) e^(-2 k^2 lambda^2).
inline double kolmogorov_survival_asymptotic(double lambda) {
  if (lambda < 0.2) return 1.0;
  double s = 0;
  for (int k = 1; k < 100; ++k) {
    const double t = std::exp(-2.0 * k * k * lambda * lambda);
    s += (k & 1 ? 2.0 : -2.0) * t;
    if (t < 1e-18) break;
  }
  return std::clamp(s, 0.0, 1.0);
}

inline constexpr int kKsExactMaxN = 10000;

struct KsResult {
  double statistic = 0;
  double p_value = 1;
  bool exact = true;
};

/// One-sample KS test of x against the fixed Gaussian `target`.
inline KsResult ks_normal_test(std::vector<double> x, const GaussianTarget& target) {
  const int n = int(x.size());
  if (n < 50) throw DomainError("ks_normal_test: need at least 50 values");
  if (!(target.variance > 0)) throw DomainError("ks_normal_test: target variance must be positive");
  std::sort(x.begin(), x.end());
  if (x.front() == x.back()) throw DomainError("ks_normal_test: degenerate batch");
  const boost::math::normal_distribution<double> law(target.mean, std::sqrt(target.variance));
  double d = 0;
  for (int i = 0; i < n; ++i) {
    const double F = boost::math::cdf(law, x[std::size_t(i)]);
    d = std::max({d, double(i + 1) / n - F, F - double(i) / n});
  }
  KsResult r;
  r.statistic = d;
  if (n <= kKsExactMaxN) {
    r.p_value = std::clamp(1.0 - kolmogorov_cdf(n, d), 0.0, 1.0);
  } else {
    const double sn = std::sqrt(double(n));
    r.p_value = kolmogorov_survival_asymptotic((sn + 0.12 + 0.11 / sn) * d);
    r.exact = false;
  }
  return r;
}

/// KS test of the standardized batch against N(0, 1); the mean and variance
/// are fitted, so the p-value is conservative.
inline KsResult ks_fitted_normal_test(const std::vector<double>& x) {
  const MomentsSummary m = moments_summary(x);
  std::vector<double> z(x.size());
  const double sd = std::sqrt(m.variance.value);
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = (x[i] - m.mean.value) / sd;
  return ks_normal_test(std::move(z), {0.0, 1.0});
}

// ---------------------------------------------------------------------------
// Edwards-Wilkinson covariance

// The field v with -d_t v = (s/2) Lap v + c dW on [0, 1], reversed at t = 1,
// has Cov(v(t, x), v(t', x')) = c^2/(2s) int_{s|t-t'|}^{s(2-t-t')} g_u(x - x') du.
// Here s = 1/2 and c^2 = 1/(1 - beta_hat^2).

inline constexpr double kEwDiffusivity = 0.5;

/// The kernel at |x - x'|^2 = r2 > 0.
inline double ew_kernel(double t, double tp, double r2, double c2) {
  const double s = kEwDiffusivity;
  return c2 / (2 * s) * heat_time_integral_r2(s * std::abs(t - tp), s * (2 - t - tp), r2);
}

struct QuadSpec {
  double rel_tol = 1e-3;
  int start_order = 10;
  int max_order = 40;
};

struct QuadResult {
  double value = 0;
  double error = 0;  // |difference| of the last two orders
  int order = 0;
  bool converged = false;
};

namespace detail {

/// Gauss-Legendre nodes and weights on [0, 1].
struct UnitRule {
  std::vector<double> x, w;
};

inline UnitRule gauss_legendre01(int n) {
  UnitRule r;
  for (double z : boost::math::legendre_p_zeros<double>(n)) {
    const double dp = boost::math::legendre_p_prime(n, z);
    const double w = 1.0 / ((1 - z * z) * dp * dp);  // weight on [0, 1] is half of 2/(...)
    if (z == 0) {
      r.x.push_back(0.5);
      r.w.push_back(w);
      continue;
    }
    r.x.push_back(0.5 * (1 - z));
    r.w.push_back(w);
    r.x.push_back(0.5 * (1 + z));
    r.w.push_back(w);
  }
  return r;
}

/// Spatial radius of the slice t of a bump (0 outside its time support).
inline double slice_radius(const TestFunction& f, double t) {
  const double dt = (t - f.t0()) / f.tau();
  return dt * dt >= 1 ? 0.0 : f.rho() * std::sqrt(1 - dt * dt);
}

/// One tensor-product pass at order n. The y = x - x' integral is done in
/// polar coordinates with radius r = r_max w^2 and t' is graded towards t,
/// which smooths the logarithmic kernel singularity at y = 0, t = t'.
inline double ew_pass(const TestFunction& f, const TestFunction& g, double c2, int n) {
  const UnitRule q = gauss_legendre01(n);
  const int nang = 2 * n;
  std::vector<double> cs(static_cast<std::size_t>(nang)), sn(static_cast<std::size_t>(nang));
  for (int k = 0; k < nang; ++k) {
    cs[std::size_t(k)] = std::cos(2 * kPi * k / nang);
    sn[std::size_t(k)] = std::sin(2 * kPi * k / nang);
  }
  const double dang = 2 * kPi / nang;
  const Vec2 dx0{f.x0().x1 - g.x0().x1, f.x0().x2 - g.x0().x2};
  const double shift = std::sqrt(dx0.norm2());

  struct Node {
    double x1, x2, w;
  };
  std::vector<Node> xs;
  CompensatedSum total;
  for (int it = 0; it < n; ++it) {
    const double t = f.t_lo() + (f.t_hi() - f.t_lo()) * q.x[std::size_t(it)];
    const double wt = (f.t_hi() - f.t_lo()) * q.w[std::size_t(it)];
    const double rt = slice_radius(f, t);
    if (rt == 0) continue;
    // x = x0 + a (cos phi, sin phi) over the slice disk of f.
    xs.clear();
    for (int ia = 0; ia < n; ++ia) {
      const double a = rt * q.x[std::size_t(ia)];
      for (int k = 0; k < nang; ++k) {
        const double x1 = f.x0().x1 + a * cs[std::size_t(k)], x2 = f.x0().x2 + a * sn[std::size_t(k)];
        const double w = rt * q.w[std::size_t(ia)] * a * dang * f(t, x1, x2);
        if (w != 0) xs.push_back({x1, x2, w});
      }
    }
    // t' on the pieces of g's support either side of t, graded towards t.
    const std::array<std::array<double, 2>, 2> pieces{{{std::max(g.t_lo(), std::min(t, g.t_hi())), g.t_lo()},
                                                        {std::min(g.t_hi(), std::max(t, g.t_lo())), g.t_hi()}}};
    for (const auto& [from, to] : pieces) {
      const double len = to - from;
      if (len == 0) continue;
      for (int is = 0; is < n; ++is) {
        const double sv = q.x[std::size_t(is)];
        const double tp = from + len * sv * sv;
        const double wtp = std::abs(len) * 2 * sv * q.w[std::size_t(is)];
        const double rtp = slice_radius(g, tp);
        if (rtp == 0) continue;
        const double rmax = rt + rtp + shift;
        CompensatedSum inner;
        for (int ir = 0; ir < n; ++ir) {
          const double wv = q.x[std::size_t(ir)];
          const double r = rmax * wv * wv;
          const double wr = rmax * 2 * wv * q.w[std::size_t(ir)] * r * dang;
          const double K = ew_kernel(t, tp, r * r, c2);
          double ang = 0;
          for (int k = 0; k < nang; ++k) {
            const double y1 = r * cs[std::size_t(k)], y2 = r * sn[std::size_t(k)];
            double C = 0;
            for (const Node& x : xs) C += x.w * g(tp, x.x1 - y1, x.x2 - y2);
            ang += C;
          }
          inner.add(wr * K * ang);
        }
        total.add(wt * wtp * inner.value());
      }
    }
  }
  return total.value();
}

}  // namespace detail

/// Cov(<v, psi>, <v, psi2>) for the reversed Edwards-Wilkinson field with
/// s = 1/2 and c = c(beta_hat). Raises the order by half until two
/// successive values agree to rel_tol.
inline QuadResult ew_covariance_quadrature(const TestFunction& psi, const TestFunction& psi2,
                                           double beta_hat, const QuadSpec& spec = {}) {
  const double c2 = c2_beta_hat(beta_hat);
  if (spec.start_order < 2 || spec.max_order < spec.start_order || !(spec.rel_tol > 0))
    throw DomainError("ew_covariance_quadrature: bad quadrature spec");
  QuadResult r;
  if (psi.amplitude() == 0 || psi2.amplitude() == 0) {
    r.converged = true;
    return r;
  }
  int n = spec.start_order;
  double prev = detail::ew_pass(psi, psi2, c2, n);
  for (;;) {
    const int next = n + std::max(2, n / 2);
    if (next > spec.max_order) break;
    const double v = detail::ew_pass(psi, psi2, c2, next);
    r = {v, std::abs(v - prev), next, false};
    if (r.error <= spec.rel_tol * std::abs(v)) {
      r.converged = true;
      return r;
    }
    prev = v;
    n = next;
  }
  throw DivergenceError("ew_covariance_quadrature: no convergence to " + std::to_string(spec.rel_tol) +
                        " by order " + std::to_string(spec.max_order));
}

/// Plain Monte-Carlo integration of the same six-dimensional integral.
inline Estimate ew_covariance_mc(const TestFunction& psi, const TestFunction& psi2, double beta_hat,
                                 std::uint64_t samples, std::uint64_t seed) {
  const double c2 = c2_beta_hat(beta_hat);
  if (samples < 2) throw DomainError("ew_covariance_mc: need at least 2 samples");
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto box = [](const TestFunction& f) {
    return std::array<double, 6>{f.t_lo(), f.t_hi(), f.x0().x1 - f.rho(), f.x0().x1 + f.rho(),
                                 f.x0().x2 - f.rho(), f.x0().x2 + f.rho()};
  };
  const auto b1 = box(psi), b2 = box(psi2);
  auto vol = [](const std::array<double, 6>& b) { return (b[1] - b[0]) * (b[3] - b[2]) * (b[5] - b[4]); };
  const double V = vol(b1) * vol(b2);
  CompensatedSum s1, s2;
  for (std::uint64_t i = 0; i < samples; ++i) {
    double p[6];
    for (int k = 0; k < 3; ++k) p[k] = b1[2 * k] + (b1[2 * k + 1] - b1[2 * k]) * unit(gen);
    for (int k = 0; k < 3; ++k) p[3 + k] = b2[2 * k] + (b2[2 * k + 1] - b2[2 * k]) * unit(gen);
    const double f = psi(p[0], p[1], p[2]);
    const double g = f == 0 ? 0.0 : psi2(p[3], p[4], p[5]);
    const double r2 = sq(p[1] - p[4]) + sq(p[2] - p[5]);
    const double v = g == 0 || r2 == 0 ? 0.0 : V * f * g * ew_kernel(p[0], p[3], r2, c2);
    s1.add(v);
    s2.add(v * v);
  }
  const double n = double(samples), m = s1.value() / n;
  return {m, std::sqrt(std::max(0.0, s2.value() / n - m * m) / (n - 1))};
}

}  // namespace dpchaos

#endif  // DPCHAOS_STATS_HPP
