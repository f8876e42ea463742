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

#ifndef DPCHAOS_COMMON_HPP
#define DPCHAOS_COMMON_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace dpchaos {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr const char* kVersion = "0.3.1";

/// Precondition violated by the caller (bad parameter, wrong regime).
struct DomainError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Request would exceed a configured time or memory budget.
struct BudgetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A quantity that diverges (e.g. the heat kernel time integral on the diagonal).
struct DivergenceError : std::domain_error {
  using std::domain_error::domain_error;
};

/// A point of Z^2.
struct Site {
  int x1 = 0;
  int x2 = 0;

  friend constexpr bool operator==(Site, Site) = default;
  constexpr int l1() const { return std::abs(x1) + std::abs(x2); }
  constexpr int linf() const { return std::max(std::abs(x1), std::abs(x2)); }
  constexpr long norm2() const { return long(x1) * x1 + long(x2) * x2; }
  constexpr Site operator-(Site o) const { return {x1 - o.x1, x2 - o.x2}; }
  constexpr Site operator+(Site o) const { return {x1 + o.x1, x2 + o.x2}; }
};

/// A point of R^2 (macroscopic space).
struct Vec2 {
  double x1 = 0.0;
  double x2 = 0.0;
  double norm2() const { return x1 * x1 + x2 * x2; }
};

/// Time n and site x have compatible parity (a walk started at the origin can be there).
constexpr bool parity_ok(long n, Site x) { return ((n + x.x1 + x.x2) & 1) == 0; }

inline constexpr Site kNeighbours[4] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};

template <class T>
constexpr T sq(T v) {
  return v * v;
}

/// ceil(c * sqrt(n)) with a small guard so that exact squares are not bumped up.
inline int scaled_radius(double c, long n) {
  return static_cast<int>(std::ceil(c * std::sqrt(static_cast<double>(n)) - 1e-9));
}

/// Neumaier compensated accumulator.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }
  CompensatedSum& operator+=(double v) {
    add(v);
    return *this;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace dpchaos

#endif  // DPCHAOS_COMMON_HPP
