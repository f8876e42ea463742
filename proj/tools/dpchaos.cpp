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

// dpchaos: experiment runner. Exit code 0 iff every verdict passes, 1 if a
// verdict fails, 2 on configuration, budget or runtime errors.

#include <fstream>
#include <functional>
#include <iostream>
#include <memory>

#include <CLI11.hpp>

#include "experiments.hpp"

namespace {

using dpchaos::cli::ExperimentConfig;
using dpchaos::cli::json;

struct Flags {
  ExperimentConfig values;
  std::vector<std::pair<CLI::Option*, std::function<void(ExperimentConfig&)>>> set;
  std::string config_file;
  bool dry_run = false;
  bool quiet = false;
};

template <class T>
void bind_option(CLI::App* app, Flags& f, const std::string& name, T ExperimentConfig::*field, const std::string& help) {
  CLI::Option* o = app->add_option(name, f.values.*field, help);
  f.set.emplace_back(o, [&f, field](ExperimentConfig& c) { c.*field = f.values.*field; });
}

void add_common(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config_file, "JSON config file; flags given on the command line override it");
  bind_option(app, f, "--n", &ExperimentConfig::n, "Horizon N, or a sweep of horizons");
  bind_option(app, f, "--beta-hat", &ExperimentConfig::beta_hat, "Rescaled inverse temperature in (0, 1)");
  bind_option(app, f, "--law", &ExperimentConfig::law, "Disorder law: gaussian or rademacher");
  bind_option(app, f, "--samples", &ExperimentConfig::samples, "Disorder samples per batch");
  bind_option(app, f, "--seed", &ExperimentConfig::seed, "Master seed");
  bind_option(app, f, "--m", &ExperimentConfig::M, "Number of boxes or log blocks");
  bind_option(app, f, "--k", &ExperimentConfig::K, "Order cutoff K (0 picks the smallest K with tail < 1e-10)");
  bind_option(app, f, "--c-box", &ExperimentConfig::c_box, "Box policy: radius ceil(c_box sqrt(N))");
  bind_option(app, f, "--k-max", &ExperimentConfig::k_max, "Order truncation for the identity checks");
  bind_option(app, f, "--psi", &ExperimentConfig::psi, "Test function: t0 tau x1 x2 rho amplitude");
  bind_option(app, f, "--psi-order", &ExperimentConfig::psi_order, "Gauss order per cube for psi averages");
  bind_option(app, f, "--realizations", &ExperimentConfig::realizations, "Realizations for the identity checks");
  bind_option(app, f, "--family", &ExperimentConfig::family, "Chaos family: z_chaos, xdom or singular");
  bind_option(app, f, "--boxes", &ExperimentConfig::boxes, "Box partition: linear or log");
  bind_option(app, f, "--mu", &ExperimentConfig::mu, "Weight of the noise pairing");
  bind_option(app, f, "--lambda", &ExperimentConfig::lambda, "Weight of the singular-product pairing");
  bind_option(app, f, "--xdom-n", &ExperimentConfig::xdom_n, "Horizon of the dominated-chaos batch (moments)");
  bind_option(app, f, "--xdom-samples", &ExperimentConfig::xdom_samples, "Samples of the dominated chaos (moments)");
  bind_option(app, f, "--mc-points", &ExperimentConfig::mc_points, "Points of the Monte-Carlo covariance oracle (ew)");
  bind_option(app, f, "--rel-tol", &ExperimentConfig::rel_tol, "Target relative error of the covariance quadrature");
  bind_option(app, f, "--workers", &ExperimentConfig::workers, "Sampling threads (0: DPCHAOS_WORKERS or all cores)");
  bind_option(app, f, "--out", &ExperimentConfig::out, "Output directory");
  bind_option(app, f, "--samples-dir", &ExperimentConfig::samples_dir, "Directory for sample batches (default: --out)");
  app->add_flag("--dry-run", f.dry_run, "Check budgets and print the cost estimate without running");
  app->add_flag("--quiet", f.quiet, "Suppress progress output");
}

ExperimentConfig resolve(const std::string& kind, const Flags& f) {
  ExperimentConfig c;
  if (!f.config_file.empty()) {
    std::ifstream in(f.config_file);
    if (!in) throw dpchaos::DomainError("cannot read config file " + f.config_file);
    const json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw dpchaos::DomainError("config file " + f.config_file + " is not valid JSON");
    c = dpchaos::cli::config_from_json(j);
    if (j.contains("kind") && c.kind != kind)
      throw dpchaos::DomainError("config is for '" + c.kind + "', not '" + kind + "'");
  }
  c.kind = kind;
  for (const auto& [opt, apply] : f.set)
    if (opt->count() > 0) apply(c);
  return dpchaos::cli::validated(c);
}

void print_verdicts(const dpchaos::cli::Report& r) {
  for (const auto& v : r.verdicts)
    std::cout << (v.passed ? "PASS " : "FAIL ") << v.name << ": value " << v.value << ", target " << v.target
              << ", tolerance " << v.tolerance << " [" << v.kind << "]\n";
  std::cout << (r.passed() ? "all verdicts passed" : "some verdicts failed") << " (" << r.verdicts.size()
            << " checks, " << r.seconds << " s)\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Directed-polymer chaos laboratory"};
  app.require_subcommand(1);
  app.set_version_flag("--version", dpchaos::kVersion);
  static const std::map<std::string, std::string> help{
      {"kernels", "Walk kernel tables, collision weights and local-limit report"},
      {"moments", "Exact second-moment curves, with optional Monte-Carlo checks"},
      {"identity", "Exact per-realization chaos identities at small N"},
      {"lognormal", "Log-normality of the partition function"},
      {"xdom", "Gaussianity of the dominated chaos"},
      {"singular", "Joint law of the noise and singular-product pairings"},
      {"ew", "Edwards-Wilkinson covariance of the rescaled field"},
      {"criterion", "Second-moment CLT criterion sweep"},
      {"zdiff", "L2 gap between Z and the product of block chaoses"}};
  std::map<std::string, std::unique_ptr<Flags>> flags;
  std::map<std::string, CLI::App*> subs;
  for (const auto& kind : dpchaos::cli::experiment_kinds()) {
    auto& f = flags[kind] = std::make_unique<Flags>();
    subs[kind] = app.add_subcommand(kind, help.at(kind));
    add_common(subs[kind], *f);
  }
  CLI11_PARSE(app, argc, argv);

  try {
    for (const auto& [kind, sub] : subs) {
      if (!sub->parsed()) continue;
      const Flags& f = *flags.at(kind);
      const ExperimentConfig c = resolve(kind, f);
      if (f.dry_run) {
        std::cout << dpchaos::cli::plan(c).dump(2) << '\n';
        return 0;
      }
      const auto report = dpchaos::cli::run_experiment(c, f.quiet ? nullptr : &std::cerr);
      print_verdicts(report);
      std::cout << "report: " << (std::filesystem::path(c.out) / "report.json").string() << '\n';
      return report.passed() ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "dpchaos: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
