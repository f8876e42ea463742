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

// Counter-based random numbers.
//
// Philox4x32-10 (Salmon, Moraes, Dror, Shaw, SC'11) maps a 128-bit counter and
// a 64-bit key to 128 random bits. Every site of the environment is addressed
// by its own counters, so a draw is a pure function of (seed, sample, n, x)
// and can be evaluated in any order on any thread.
//
// Normal variates use the 128-layer ziggurat of Marsaglia and Tsang with
// Doornik's constants. A rejected attempt moves to a fresh counter instead of
// consuming a stream.

#ifndef DPCHAOS_RNG_HPP
#define DPCHAOS_RNG_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include <Eigen/Core>

#if defined(__AVX512F__) || defined(__AVX2__)
#include <immintrin.h>
#endif

namespace dpchaos {

inline constexpr const char* kRngAlgorithm = "philox4x32-10-paired/ziggurat128";

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

namespace detail {

inline constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
inline constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
inline constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

}  // namespace detail

constexpr PhiloxCounter philox4x32_10(PhiloxCounter c, PhiloxKey k) {
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = std::uint64_t{detail::kPhiloxM0} * c[0];
    const std::uint64_t p1 = std::uint64_t{detail::kPhiloxM1} * c[2];
    c = {std::uint32_t(p1 >> 32) ^ c[1] ^ k[0], std::uint32_t(p1),
         std::uint32_t(p0 >> 32) ^ c[3] ^ k[1], std::uint32_t(p0)};
    k[0] += detail::kPhiloxW0;
    k[1] += detail::kPhiloxW1;
  }
  return c;
}

constexpr PhiloxKey philox_key(std::uint64_t seed) {
  return {std::uint32_t(seed), std::uint32_t(seed >> 32)};
}

/// Uniform on the open interval (0, 1) from 53 random bits.
constexpr double open_unit(std::uint64_t bits) {
  return (double(bits >> 11) + 0.5) * 0x1.0p-53;
}

/// Uniform on [-1, 1) from 53 random bits.
constexpr double signed_unit(std::uint64_t bits) {
  return double(std::int64_t(bits >> 11) - (std::int64_t{1} << 52)) * 0x1.0p-52;
}

constexpr std::uint64_t join64(std::uint32_t lo, std::uint32_t hi) {
  return std::uint64_t{lo} | (std::uint64_t{hi} << 32);
}

/// Philox outputs for counters (n, x1 + l dx1, x2 + l dx2, sample), l < len,
/// written as four word arrays. Integer-exact, so every code path below
/// produces identical bits.
inline void philox_lanes(std::uint32_t n, int x1, int dx1, int x2, int dx2, std::uint32_t sample,
                         PhiloxKey key, int len, std::uint32_t* w0, std::uint32_t* w1,
                         std::uint32_t* w2, std::uint32_t* w3) {
  int l = 0;
#if defined(__AVX512F__)
  {
    const __m512i m0 = _mm512_set1_epi32(int(detail::kPhiloxM0));
    const __m512i m1 = _mm512_set1_epi32(int(detail::kPhiloxM1));
    const __m512i iota = _mm512_setr_epi32(0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15);
    const __m512i vdx1 = _mm512_set1_epi32(dx1), vdx2 = _mm512_set1_epi32(dx2);
    auto mulhi = [](__m512i a, __m512i m) {
      const __m512i even = _mm512_srli_epi64(_mm512_mul_epu32(a, m), 32);
      const __m512i odd = _mm512_mul_epu32(_mm512_srli_epi64(a, 32), m);
      return _mm512_mask_blend_epi32(__mmask16(0xAAAA), even, odd);
    };
    for (; l + 16 <= len; l += 16) {
      const __m512i idx = _mm512_add_epi32(iota, _mm512_set1_epi32(l));
      __m512i c0 = _mm512_set1_epi32(int(n));
      __m512i c1 = _mm512_add_epi32(_mm512_set1_epi32(x1), _mm512_mullo_epi32(idx, vdx1));
      __m512i c2 = _mm512_add_epi32(_mm512_set1_epi32(x2), _mm512_mullo_epi32(idx, vdx2));
      __m512i c3 = _mm512_set1_epi32(int(sample));
      std::uint32_t k0 = key[0], k1 = key[1];
      for (int r = 0; r < 10; ++r) {
        const __m512i hi0 = mulhi(c0, m0), lo0 = _mm512_mullo_epi32(c0, m0);
        const __m512i hi1 = mulhi(c2, m1), lo1 = _mm512_mullo_epi32(c2, m1);
        c0 = _mm512_ternarylogic_epi32(hi1, c1, _mm512_set1_epi32(int(k0)), 0x96);
        c2 = _mm512_ternarylogic_epi32(hi0, c3, _mm512_set1_epi32(int(k1)), 0x96);
        c1 = lo1;
        c3 = lo0;
        k0 += detail::kPhiloxW0;
        k1 += detail::kPhiloxW1;
      }
      _mm512_storeu_si512(w0 + l, c0);
      _mm512_storeu_si512(w1 + l, c1);
      _mm512_storeu_si512(w2 + l, c2);
      _mm512_storeu_si512(w3 + l, c3);
    }
  }
#elif defined(__AVX2__)
  {
    const __m256i m0 = _mm256_set1_epi32(int(detail::kPhiloxM0));
    const __m256i m1 = _mm256_set1_epi32(int(detail::kPhiloxM1));
    const __m256i iota = _mm256_setr_epi32(0, 1, 2, 3, 4, 5, 6, 7);
    const __m256i vdx1 = _mm256_set1_epi32(dx1), vdx2 = _mm256_set1_epi32(dx2);
    auto mulhi = [](__m256i a, __m256i m) {
      const __m256i even = _mm256_srli_epi64(_mm256_mul_epu32(a, m), 32);
      const __m256i odd = _mm256_mul_epu32(_mm256_srli_epi64(a, 32), m);
      return _mm256_blend_epi32(even, odd, 0xAA);
    };
    for (; l + 8 <= len; l += 8) {
      const __m256i idx = _mm256_add_epi32(iota, _mm256_set1_epi32(l));
      __m256i c0 = _mm256_set1_epi32(int(n));
      __m256i c1 = _mm256_add_epi32(_mm256_set1_epi32(x1), _mm256_mullo_epi32(idx, vdx1));
      __m256i c2 = _mm256_add_epi32(_mm256_set1_epi32(x2), _mm256_mullo_epi32(idx, vdx2));
      __m256i c3 = _mm256_set1_epi32(int(sample));
      std::uint32_t k0 = key[0], k1 = key[1];
      for (int r = 0; r < 10; ++r) {
        const __m256i hi0 = mulhi(c0, m0), lo0 = _mm256_mullo_epi32(c0, m0);
        const __m256i hi1 = mulhi(c2, m1), lo1 = _mm256_mullo_epi32(c2, m1);
        c0 = _mm256_xor_si256(_mm256_xor_si256(hi1, c1), _mm256_set1_epi32(int(k0)));
        c2 = _mm256_xor_si256(_mm256_xor_si256(hi0, c3), _mm256_set1_epi32(int(k1)));
        c1 = lo1;
        c3 = lo0;
        k0 += detail::kPhiloxW0;
        k1 += detail::kPhiloxW1;
      }
      _mm256_storeu_si256(reinterpret_cast<__m256i*>(w0 + l), c0);
      _mm256_storeu_si256(reinterpret_cast<__m256i*>(w1 + l), c1);
      _mm256_storeu_si256(reinterpret_cast<__m256i*>(w2 + l), c2);
      _mm256_storeu_si256(reinterpret_cast<__m256i*>(w3 + l), c3);
    }
  }
#endif
  for (; l < len; ++l) {
    const PhiloxCounter r = philox4x32_10(
        {n, std::uint32_t(x1 + l * dx1), std::uint32_t(x2 + l * dx2), sample}, key);
    w0[l] = r[0];
    w1[l] = r[1];
    w2[l] = r[2];
    w3[l] = r[3];
  }
}

namespace detail {

struct ZigguratTables {
  static constexpr int kLayers = 128;
  static constexpr double kR = 3.442619855899;
  static constexpr double kV = 9.91256303526217e-3;
  double x[kLayers + 1];
  double ratio[kLayers];

  ZigguratTables() {
    const double f = std::exp(-0.5 * kR * kR);
    x[0] = kV / f;
    x[1] = kR;
    x[kLayers] = 0.0;
    for (int i = 2; i < kLayers; ++i)
      x[i] = std::sqrt(-2.0 * std::log(kV / x[i - 1] + std::exp(-0.5 * x[i - 1] * x[i - 1])));
    for (int i = 0; i < kLayers; ++i) ratio[i] = x[i + 1] / x[i];
  }
};

inline const ZigguratTables& ziggurat_tables() {
  static const ZigguratTables t;
  return t;
}

}  // namespace detail

/// Addresses one environment site. Attempt 0 of a site takes one half of the
/// block shared with its partner (x1 xor 1, x2 + x1 - (x1 xor 1)) on the same
/// anti-diagonal; later attempts own a full block each.
struct SiteCounter {
  std::uint32_t n = 0;
  std::int32_t x1 = 0;
  std::int32_t x2 = 0;
  std::uint32_t sample = 0;

  /// Counter of attempt >= 1.
  constexpr PhiloxCounter at(std::uint32_t attempt) const {
    return {n | (attempt << 24), std::uint32_t(x1), std::uint32_t(x2), sample};
  }
  /// Counter of the block shared by the pair at attempt 0.
  constexpr PhiloxCounter pair() const {
    return {n, std::uint32_t(x1 + x2), std::uint32_t(x1 >> 1), sample};
  }
  /// Which half of the pair block belongs to this site.
  constexpr int half() const { return x1 & 1; }
};

/// The 64 bits of attempt 0 of one site.
struct SiteBits {
  std::uint32_t lo = 0;
  std::uint32_t hi = 0;
};

inline SiteBits site_bits(const PhiloxKey& key, const SiteCounter& site) {
  const PhiloxCounter r = philox4x32_10(site.pair(), key);
  return site.half() ? SiteBits{r[2], r[3]} : SiteBits{r[0], r[1]};
}

/// Attempt index reserved for the wedge uniform of attempt 0.
inline constexpr std::uint32_t kWedgeAttempt = 255;

inline constexpr std::uint32_t kMaxTime = (1u << 24) - 1;

namespace detail {

/// exp on 8 lanes through one fixed packet code path, so a value does not
/// depend on which lane or call it went through.
inline void exp8(double* v) {
  Eigen::Map<Eigen::Array<double, 8, 1>> a(v);
  a = a.exp();
}

inline void wedge_args(const ZigguratTables& z, int layer, double x, double* f) {
  f[0] = -0.5 * (z.x[layer] * z.x[layer] - x * x);
  f[1] = -0.5 * (z.x[layer + 1] * z.x[layer + 1] - x * x);
}

inline bool wedge_accepts(const double* f, double unit) { return f[1] + unit * (f[0] - f[1]) < 1.0; }

/// Marsaglia's tail beyond R, one fresh counter per trial.
inline double normal_tail(const PhiloxKey& key, const SiteCounter& site, bool neg,
                          std::uint32_t attempt) {
  const auto& z = ziggurat_tables();
  for (;; ++attempt) {
    const PhiloxCounter t = philox4x32_10(site.at(attempt), key);
    const double x = std::log(open_unit(join64(t[0], t[1]))) / z.kR;
    const double y = std::log(open_unit(join64(t[2], t[3])));
    if (-2.0 * y >= x * x) return neg ? x - z.kR : z.kR - x;
  }
}

}  // namespace detail

/// Standard normal draw owned by one site, from its attempt-0 bits.
inline double site_normal(const PhiloxKey& key, const SiteCounter& site, SiteBits first) {
  const auto& z = detail::ziggurat_tables();
  std::uint64_t bits = join64(first.lo, first.hi);
  for (std::uint32_t attempt = 0;;) {
    const double u = signed_unit(bits);
    const int layer = int(bits & 0x7Fu);  // bits below the 53 used by u
    if (std::abs(u) < z.ratio[layer]) return u * z.x[layer];
    if (layer == 0) return detail::normal_tail(key, site, u < 0, attempt + 1);
    const double x = u * z.x[layer];
    alignas(64) double f[8] = {};
    detail::wedge_args(z, layer, x, f);
    detail::exp8(f);
    const PhiloxCounter w = philox4x32_10(site.at(attempt == 0 ? kWedgeAttempt : attempt), key);
    if (detail::wedge_accepts(f, open_unit(join64(w[2], w[3])))) return x;
    if (++attempt >= kWedgeAttempt) throw std::runtime_error("site_normal: attempts exhausted");
    const PhiloxCounter r = philox4x32_10(site.at(attempt), key);
    bits = join64(r[0], r[1]);
  }
}

inline double site_normal(const PhiloxKey& key, const SiteCounter& site) {
  return site_normal(key, site, site_bits(key, site));
}

/// Attempt-0 bits of the sites (n, x1 + l, x2 - l), l < len <= 256, along an
/// anti-diagonal, where consecutive sites share pair blocks. The bits of site
/// l land at lo[off + l], hi[off + l] with the returned offset off in {0, 1};
/// lo and hi need room for len + 1 + 32 entries.
inline int diagonal_bits(const PhiloxKey& key, std::uint32_t n, int x1, int x2,
                         std::uint32_t sample, int len, std::uint32_t* lo, std::uint32_t* hi) {
  constexpr int kMaxBlocks = 129;
  if (len > 256) throw std::length_error("diagonal_bits: too many lanes");
  if (len <= 0) return 0;
  alignas(64) std::uint32_t b0[kMaxBlocks + 15], b1[kMaxBlocks + 15], b2[kMaxBlocks + 15],
      b3[kMaxBlocks + 15];
  const int k0 = x1 >> 1, nb = ((x1 + len - 1) >> 1) - k0 + 1;
  philox_lanes(n, x1 + x2, 0, k0, 1, sample, key, nb, b0, b1, b2, b3);
  int b = 0;
#if defined(__AVX512F__)
  {
    const __m512i idx_lo = _mm512_setr_epi32(0, 16, 1, 17, 2, 18, 3, 19, 4, 20, 5, 21, 6, 22, 7, 23);
    const __m512i idx_hi =
        _mm512_setr_epi32(8, 24, 9, 25, 10, 26, 11, 27, 12, 28, 13, 29, 14, 30, 15, 31);
    for (; b < nb; b += 16) {
      const __m512i v0 = _mm512_loadu_si512(b0 + b), v1 = _mm512_loadu_si512(b1 + b);
      const __m512i v2 = _mm512_loadu_si512(b2 + b), v3 = _mm512_loadu_si512(b3 + b);
      _mm512_storeu_si512(lo + 2 * b, _mm512_permutex2var_epi32(v0, idx_lo, v2));
      _mm512_storeu_si512(lo + 2 * b + 16, _mm512_permutex2var_epi32(v0, idx_hi, v2));
      _mm512_storeu_si512(hi + 2 * b, _mm512_permutex2var_epi32(v1, idx_lo, v3));
      _mm512_storeu_si512(hi + 2 * b + 16, _mm512_permutex2var_epi32(v1, idx_hi, v3));
    }
  }
#endif
  for (; b < nb; ++b) {
    lo[2 * b] = b0[b];
    lo[2 * b + 1] = b2[b];
    hi[2 * b] = b1[b];
    hi[2 * b + 1] = b3[b];
  }
  return x1 & 1;
}

/// Normal draws for the sites (n, x1 + l dx1, x2 + l dx2), l < len <= 256,
/// given their attempt-0 bits.
inline void normal_lanes(const PhiloxKey& key, std::uint32_t n, int x1, int dx1, int x2, int dx2,
                         std::uint32_t sample, int len, const std::uint32_t* lo,
                         const std::uint32_t* hi, double* out) {
  const auto& z = detail::ziggurat_tables();
  constexpr int kMaxLen = 256;
  if (len > kMaxLen) throw std::length_error("normal_lanes: too many lanes");
  int slow[kMaxLen];
  int n_slow = 0;
  int l = 0;
#if defined(__AVX512F__) && defined(__AVX512DQ__)
  {
    const __m512i bias = _mm512_set1_epi64(std::int64_t{1} << 52);
    const __m512d scale = _mm512_set1_pd(0x1.0p-52);
    const __m512d abs_mask = _mm512_castsi512_pd(_mm512_set1_epi64(0x7fffffffffffffffLL));
    for (; l + 8 <= len; l += 8) {
      const __m256i vlo = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(lo + l));
      const __m256i vhi = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(hi + l));
      const __m512i bits = _mm512_or_si512(_mm512_cvtepu32_epi64(vlo),
                                           _mm512_slli_epi64(_mm512_cvtepu32_epi64(vhi), 32));
      const __m512d u = _mm512_mul_pd(
          _mm512_cvtepi64_pd(_mm512_sub_epi64(_mm512_srli_epi64(bits, 11), bias)), scale);
      const __m256i layer = _mm256_and_si256(vlo, _mm256_set1_epi32(0x7F));
      const __m512d xs = _mm512_i32gather_pd(layer, z.x, 8);
      const __m512d ratio = _mm512_i32gather_pd(layer, z.ratio, 8);
      _mm512_storeu_pd(out + l, _mm512_mul_pd(u, xs));
      unsigned fail = ~unsigned(_mm512_cmp_pd_mask(_mm512_and_pd(u, abs_mask), ratio, _CMP_LT_OQ)) & 0xFFu;
      while (fail) {
        slow[n_slow++] = l + __builtin_ctz(fail);
        fail &= fail - 1;
      }
    }
  }
#endif
  for (; l < len; ++l) {
    const double u = signed_unit(join64(lo[l], hi[l]));
    const int layer = int(lo[l] & 0x7Fu);
    out[l] = u * z.x[layer];
    if (!(std::abs(u) < z.ratio[layer])) slow[n_slow++] = l;
  }
  // Wedge tests four lanes at a time (two exponentials each).
  auto site_of = [&](int k) {
    return SiteCounter{n, x1 + k * dx1, x2 + k * dx2, sample};
  };
  int pending[4];
  int n_pending = 0;
  alignas(64) double f[8];
  auto flush = [&]() {
    std::fill(f + 2 * n_pending, f + 8, 0.0);
    detail::exp8(f);
    for (int q = 0; q < n_pending; ++q) {
      const int k = pending[q];
      const SiteCounter c = site_of(k);
      const PhiloxCounter w = philox4x32_10(c.at(kWedgeAttempt), key);
      if (!detail::wedge_accepts(f + 2 * q, open_unit(join64(w[2], w[3]))))
        out[k] = site_normal(key, c, SiteBits{lo[k], hi[k]});
    }
    n_pending = 0;
  };
  for (int q = 0; q < n_slow; ++q) {
    const int k = slow[q];
    const int layer = int(lo[k] & 0x7Fu);
    if (layer == 0) {
      out[k] = site_normal(key, site_of(k), SiteBits{lo[k], hi[k]});
      continue;
    }
    detail::wedge_args(z, layer, out[k], f + 2 * n_pending);
    pending[n_pending++] = k;
    if (n_pending == 4) flush();
  }
  if (n_pending) flush();
}

}  // namespace dpchaos

#endif  // DPCHAOS_RNG_HPP
