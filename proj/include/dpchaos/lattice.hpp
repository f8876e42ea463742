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

// Space-time grids for the lattice sweeps.
//
// At time m the sites with m + x1 + x2 even are addressed by
//
//   i = (m + x1 + x2) / 2,   j = (m + x1 - x2) / 2,
//
// so one walk step moves (i, j) to one of (i + di, j + dj), di, dj in {0, 1}.
// The 4-neighbour average is then the product of two 2-point averages and a
// sweep touches contiguous memory only. A sup-norm box |x|_inf <= R becomes a
// rotated band of the (i, j) plane which fits a (2R+1)^2 array whose origin
// slides by one index every second time step.

#ifndef DPCHAOS_LATTICE_HPP
#define DPCHAOS_LATTICE_HPP

#include <algorithm>
#include <cstddef>
#include <utility>
#include <vector>

#include "dpchaos/common.hpp"

namespace dpchaos {

class BoxGeometry {
 public:
  /// `parity` selects the sublattice: sites with m + x1 + x2 + parity even.
  explicit BoxGeometry(int radius, int parity = 0)
      : R_(radius), W_(2 * radius + 1), p_(parity) {
    if (radius < 1) throw DomainError("box radius must be >= 1");
    if (parity != 0 && parity != 1) throw DomainError("parity must be 0 or 1");
  }

  int radius() const { return R_; }
  int width() const { return W_; }
  int parity() const { return p_; }

  /// Smallest rotated index stored at time m (m >= 0).
  int origin(int m) const { return (m - p_ + 1) / 2 - R_; }
  /// origin(m) - origin(m - 1), either 0 or 1.
  int shift(int m) const { return (m - p_) & 1; }

  Site site(int m, int i, int j) const { return {i + j - m + p_, i - j}; }
  Site site_at(int m, int a, int b) const { return site(m, a + origin(m), b + origin(m)); }

  bool on_sublattice(int m, Site z) const { return ((m + z.x1 + z.x2 + p_) & 1) == 0; }

  /// Array position (a, b) of site z at time m; z must lie on the sublattice.
  std::pair<int, int> cell(int m, Site z) const {
    const int u = m + z.x1 - p_;
    return {(u + z.x2) / 2 - origin(m), (u - z.x2) / 2 - origin(m)};
  }

  bool contains(Site z) const { return z.linf() <= R_; }

  /// Range of stored rows a at time m whose sites can lie in the box.
  std::pair<int, int> rows(int m) const { return {0, W_ - 1 - ((m - p_) & 1)}; }

  /// Columns b of row a at time m that lie in the box (empty if lo > hi).
  std::pair<int, int> cols(int m, int a) const {
    const int o = origin(m), i = a + o, c = m - p_;
    const int lo = std::max({c - R_ - i, i - R_, o});
    const int hi = std::min({c + R_ - i, i + R_, o + W_ - 1});
    return {lo - o, hi - o};
  }

 private:
  int R_;
  int W_;
  int p_;
};

/// A (2R+1)^2 array with a one-cell frame. Frame and out-of-box cells hold a
/// neutral value (0 for forward densities, 1 for backward partition functions).
class BoxField {
 public:
  BoxField() = default;
  BoxField(const BoxGeometry& g, double neutral)
      : W_(g.width()), stride_((g.width() + 2 + 7) & ~7), neutral_(neutral),
        data_(std::size_t(stride_) * (W_ + 2), neutral) {}

  int width() const { return W_; }
  int stride() const { return stride_; }
  double neutral() const { return neutral_; }

  double* row(int a) { return data_.data() + std::size_t(a + 1) * stride_ + 1; }
  const double* row(int a) const { return data_.data() + std::size_t(a + 1) * stride_ + 1; }
  double& at(int a, int b) { return row(a)[b]; }
  double at(int a, int b) const { return row(a)[b]; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  /// Reset the stored cells outside the box at time m to the neutral value.
  void clear_outside(const BoxGeometry& g, int m) {
    for (int a = 0; a < W_; ++a) {
      auto [lo, hi] = g.cols(m, a);
      double* r = row(a);
      if (lo > hi) {
        std::fill(r, r + W_, neutral_);
        continue;
      }
      std::fill(r, r + lo, neutral_);
      std::fill(r + hi + 1, r + W_, neutral_);
    }
  }

  std::size_t bytes() const { return data_.size() * sizeof(double); }

 private:
  int W_ = 0;
  int stride_ = 0;
  double neutral_ = 0;
  std::vector<double> data_;
};

/// next(m) = P old(m - 1) restricted to the box, over the rows [a_lo, a_hi]
/// and, within each, the box columns clipped to [b_lo, b_hi]. Cells of `next`
/// outside that window are left untouched.
inline void forward_average(const BoxGeometry& g, int m, const BoxField& old, BoxField& next,
                            int a_lo, int a_hi, int b_lo, int b_hi) {
  const int s = g.shift(m);
  for (int a = a_lo; a <= a_hi; ++a) {
    auto [lo, hi] = g.cols(m, a);
    lo = std::max(lo, b_lo);
    hi = std::min(hi, b_hi);
    if (lo > hi) continue;
    const double* r0 = old.row(a + s);
    const double* r1 = old.row(a + s - 1);
    double* out = next.row(a);
    for (int b = lo; b <= hi; ++b)
      out[b] = 0.25 * ((r0[b + s] + r1[b + s]) + (r0[b + s - 1] + r1[b + s - 1]));
  }
}

/// Z(m - 1) = 1/4 sum of V(m) over the four successors, V = w Z at time m
/// with neutral value 1 outside the box. Writes every box cell of `next`.
inline void backward_average(const BoxGeometry& g, int m, const BoxField& v, BoxField& next) {
  const int s = g.shift(m);
  for (int a = 0; a < g.width(); ++a) {
    auto [lo, hi] = g.cols(m - 1, a);
    if (lo > hi) continue;
    const double* r0 = v.row(a - s);
    const double* r1 = v.row(a + 1 - s);
    double* out = next.row(a);
    for (int b = lo; b <= hi; ++b)
      out[b] = 0.25 * ((r0[b - s] + r1[b - s]) + (r0[b + 1 - s] + r1[b + 1 - s]));
  }
}

}  // namespace dpchaos

#endif  // DPCHAOS_LATTICE_HPP
