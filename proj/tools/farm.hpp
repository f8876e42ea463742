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

// Seeded sample farming with resumable JSON-lines persistence.
//
// Sample i of a batch is a pure function of (spec, i): workers pull indices
// from a shared counter and the finished file is rewritten in index order,
// so its bytes do not depend on the worker count or on interruptions.

#ifndef DPCHAOS_TOOLS_FARM_HPP
#define DPCHAOS_TOOLS_FARM_HPP

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "dpchaos/chaos_exact.hpp"
#include "dpchaos/disorder.hpp"
#include "dpchaos/polymer_sim.hpp"

namespace dpchaos::farm {

using json = nlohmann::json;
namespace fs = std::filesystem;

enum class Observable { kField, kOrigin, kXdom, kZdiff };

inline const char* observable_name(Observable o) {
  switch (o) {
    case Observable::kField: return "field";
    case Observable::kOrigin: return "origin";
    case Observable::kXdom: return "xdom";
    case Observable::kZdiff: return "zdiff";
  }
  return "?";
}

inline Observable observable_from_name(const std::string& s) {
  for (Observable o : {Observable::kField, Observable::kOrigin, Observable::kXdom, Observable::kZdiff})
    if (s == observable_name(o)) return o;
  throw DomainError("unknown observable '" + s + "'");
}

/// Everything that determines the values of a batch.
struct FarmSpec {
  Observable observable = Observable::kOrigin;
  int N = 64;
  double beta_hat = 0.5;
  std::string law = "gaussian";
  std::uint64_t seed = 42;
  std::uint32_t samples = 100;
  double c_box = kDefaultCBox;
  int M = 8;                                                  // zdiff blocks
  std::array<double, 6> psi{0.35, 0.25, 0.0, 0.0, 0.5, 1.0};  // t0, tau, x1, x2, rho, amp
  int psi_order = 3;

  int box_radius() const { return policy_box_radius(N, c_box); }
  TestFunction test_function() const { return TestFunction(psi[0], psi[1], {psi[2], psi[3]}, psi[4], psi[5]); }
};

/// The fields that fix sample values; the sample count is excluded so a
/// batch can be extended.
inline json identity_json(const FarmSpec& s) {
  json j{{"observable", observable_name(s.observable)},
         {"N", s.N},
         {"beta_hat", s.beta_hat},
         {"law", s.law},
         {"seed", s.seed},
         {"c_box", s.c_box},
         {"box_radius", s.box_radius()},
         {"rng", kRngAlgorithm},
         {"version", kVersion}};
  if (s.observable == Observable::kZdiff) j["M"] = s.M;
  if (s.observable == Observable::kField) {
    j["psi"] = s.psi;
    j["psi_order"] = s.psi_order;
  }
  return j;
}

inline json to_json(const FarmSpec& s) {
  json j = identity_json(s);
  j["samples"] = s.samples;
  return j;
}

inline std::string default_dir_name(const FarmSpec& s) {
  std::ostringstream os;
  os << observable_name(s.observable) << "-n" << s.N << "-bh" << s.beta_hat << '-' << s.law << "-seed"
     << s.seed;
  if (s.observable == Observable::kZdiff) os << "-m" << s.M;
  return os.str();
}

/// Bytes held per worker: two ping-pong pairs of framed fields.
inline std::size_t worker_bytes(const FarmSpec& s) {
  const std::size_t w = std::size_t(2 * s.box_radius() + 3);
  return 4 * w * w * sizeof(double);
}

/// Rough single-core seconds per sample on a current desktop core.
inline double estimate_seconds(const FarmSpec& s) {
  const double n = s.N, w = 2.0 * s.box_radius() + 1;
  switch (s.observable) {
    case Observable::kField: return 5e-9 * 2 * n * w * w;
    case Observable::kOrigin: return 4e-9 * n * w * w;
    case Observable::kXdom: return 4e-11 * n * n * n * w * w;
    case Observable::kZdiff: return 4e-11 * n * n * n * w * w + 4e-9 * n * w * w;
  }
  return 0;
}

/// Rejects configurations beyond the module budgets before any sampling.
inline void check_budget(const FarmSpec& s, unsigned workers, std::size_t memory_budget) {
  if (s.N < 1) throw DomainError("N must be >= 1");
  if (s.samples < 2) throw DomainError("a batch needs at least 2 samples");
  if (workers < 1) throw DomainError("need at least one worker");
  make_schedule(s.beta_hat, s.N, DisorderLaw::from_name(s.law));
  const std::size_t need = std::size_t(workers) * worker_bytes(s);
  if (need > memory_budget)
    throw BudgetError("sampling needs " + std::to_string(need) + " bytes, budget is " +
                      std::to_string(memory_budget));
  if ((s.observable == Observable::kXdom || s.observable == Observable::kZdiff) && s.N > kXdomExactMaxN)
    throw BudgetError("dominated chaos beyond N = " + std::to_string(kXdomExactMaxN) +
                      " exceeds the exact-mode budget");
  if (s.observable == Observable::kZdiff && (s.M < 1 || s.M > 64)) throw DomainError("M must lie in [1, 64]");
  if (s.observable == Observable::kField) s.test_function();
}

/// Computes sample i of a batch.
class SampleEngine {
 public:
  explicit SampleEngine(const FarmSpec& s)
      : spec_(s),
        law_(DisorderLaw::from_name(s.law)),
        sched_(make_schedule(s.beta_hat, s.N, law_)),
        R_(s.box_radius()) {
    if (s.observable == Observable::kField) psi_ = cube_average_psi(s.test_function(), s.N, s.psi_order);
  }

  const CouplingSchedule& schedule() const { return sched_; }
  const std::optional<PsiTable>& psi() const { return psi_; }

  json operator()(std::uint32_t i) const {
    const DisorderPlane plane(spec_.seed, i, law_, sched_, R_);
    json j{{"i", i}};
    switch (spec_.observable) {
      case Observable::kField: {
        const SampleRecord r = stream_sample(plane, R_, &*psi_);
        j["z"] = r.z00;
        j["white"] = r.white;
        j["v"] = r.v;
        j["xi"] = r.xi;
        j["log_sum"] = r.log_sum;
        break;
      }
      case Observable::kOrigin: j["z"] = partition_at_origin(plane, R_); break;
      case Observable::kXdom: j["x"] = xdom_eval(plane, sched_, {spec_.N, R_}); break;
      case Observable::kZdiff:
        j["z"] = partition_at_origin(plane, R_);
        j["zdiff"] = zdiff_eval(plane, sched_, spec_.N, spec_.M, R_);
        break;
    }
    return j;
  }

 private:
  FarmSpec spec_;
  DisorderLaw law_;
  CouplingSchedule sched_;
  int R_;
  std::optional<PsiTable> psi_;
};

/// Samples sorted by index.
using Batch = std::vector<json>;

inline std::vector<double> column(const Batch& b, const std::string& key) {
  std::vector<double> v;
  v.reserve(b.size());
  for (const json& s : b) v.push_back(s.at(key).get<double>());
  return v;
}

struct FarmResult {
  Batch samples;
  std::size_t reused = 0;
  std::size_t computed = 0;
  double seconds = 0;
};

namespace detail {

/// Reads complete sample lines; a torn trailing line is dropped.
inline std::map<std::uint32_t, json> read_samples(const fs::path& file) {
  std::map<std::uint32_t, json> out;
  std::ifstream in(file);
  std::string line;
  while (std::getline(in, line)) {
    if (in.eof()) break;  // no trailing newline: interrupted write
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("i")) break;
    out.emplace(j["i"].get<std::uint32_t>(), j);
  }
  return out;
}

inline void write_sorted(const fs::path& file, const std::map<std::uint32_t, json>& all) {
  const fs::path tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    for (const auto& [i, j] : all) out << j.dump() << '\n';
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  fs::rename(tmp, file);
}

}  // namespace detail

inline unsigned default_workers() {
  if (const char* env = std::getenv("DPCHAOS_WORKERS")) {
    const int w = std::atoi(env);
    if (w > 0) return unsigned(w);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Fills `dir`/samples.jsonl up to spec.samples, reusing what is there.
inline FarmResult run_farm(const FarmSpec& spec, const fs::path& dir, unsigned workers,
                           std::ostream* log = nullptr,
                           std::size_t memory_budget = kDefaultMemoryBudget) {
  check_budget(spec, workers, memory_budget);
  fs::create_directories(dir);
  const fs::path spec_file = dir / "samples.spec.json";
  const fs::path data_file = dir / "samples.jsonl";
  const json ident = identity_json(spec);
  if (fs::exists(spec_file)) {
    std::ifstream in(spec_file);
    const json old = json::parse(in, nullptr, false);
    if (old != ident)
      throw DomainError("samples in " + dir.string() + " come from a different configuration");
  } else {
    std::ofstream(spec_file) << ident.dump(2) << '\n';
  }

  auto all = detail::read_samples(data_file);
  std::vector<std::uint32_t> todo;
  for (std::uint32_t i = 0; i < spec.samples; ++i)
    if (!all.count(i)) todo.push_back(i);

  FarmResult res;
  res.reused = spec.samples - todo.size();
  const auto t0 = std::chrono::steady_clock::now();
  if (!todo.empty()) {
    detail::write_sorted(data_file, all);  // drop any torn line before appending
    const SampleEngine engine(spec);
    std::ofstream out(data_file, std::ios::app);
    std::mutex mu;
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::size_t done = 0;
    auto work = [&] {
      for (;;) {
        const std::size_t k = next.fetch_add(1);
        if (k >= todo.size()) return;
        json j;
        try {
          j = engine(todo[k]);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!failure) failure = std::current_exception();
          next = todo.size();
          return;
        }
        std::lock_guard lock(mu);
        out << j.dump() << '\n' << std::flush;
        all.emplace(todo[k], std::move(j));
        ++done;
        if (log && (done % 100 == 0 || done == todo.size())) {
          const double el = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
          *log << "[" << default_dir_name(spec) << "] " << done << '/' << todo.size() << " samples, "
               << el << " s elapsed, ~" << el / double(done) * double(todo.size() - done) << " s left\n"
               << std::flush;
        }
      }
    };
    const unsigned n = std::max(1u, std::min<unsigned>(workers, unsigned(todo.size())));
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < n; ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    out.close();
    if (failure) std::rethrow_exception(failure);
    res.computed = done;
  }
  detail::write_sorted(data_file, all);
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  for (std::uint32_t i = 0; i < spec.samples; ++i) res.samples.push_back(all.at(i));
  return res;
}

}  // namespace dpchaos::farm

#endif  // DPCHAOS_TOOLS_FARM_HPP
