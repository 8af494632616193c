// memscope CLI: pool inspection, experiment validation and launch, result
// retrieval, and simulator runs.
//
// Exit codes: 0 success, 1 configuration or validation failure, 2 runtime
// failure while executing or persisting an experiment.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "memscope/analysis.hpp"
#include "memscope/coordinator.hpp"
#include "memscope/error.hpp"
#include "memscope/experiment_line.hpp"
#include "memscope/native/backend.hpp"
#include "memscope/pools.hpp"
#include "memscope/region_config.hpp"
#include "memscope/sim/backend.hpp"
#include "memscope/sim/model.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;

struct CliOptions {
  std::string regions_path;
  std::string model_path;
  std::string backend = "native";
  std::string exp_line;
  std::string counter_sets;
  std::string out_path = "./memscope_results.csv";
  std::string trace_path;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::uint32_t cores = 0;
};

std::string load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw memscope::Error("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

memscope::PoolManager build_pools(const CliOptions& opts) {
  std::vector<memscope::MemoryRegionDescriptor> regions;
  if (opts.regions_path.empty()) {
    regions = memscope::default_regions();
  } else {
    auto parsed = memscope::parse_region_config(load_file(opts.regions_path));
    for (const auto& d : parsed.diagnostics) {
      std::cerr << "warning: " << opts.regions_path << ": " << d << "\n";
    }
    regions = std::move(parsed.regions);
  }
  if (regions.empty()) throw memscope::Error("no usable memory regions configured");
  return memscope::PoolManager::create(std::move(regions));
}

memscope::sim::SimSystemModel build_model(const CliOptions& opts) {
  memscope::sim::SimSystemModel model = opts.model_path.empty()
                                            ? memscope::sim::default_model()
                                            : memscope::sim::parse_model(load_file(opts.model_path));
  const auto diag = memscope::sim::validate_model(model);
  for (const auto& w : diag.warnings) std::cerr << "warning: model: " << w << "\n";
  if (!diag.ok()) {
    std::string joined;
    for (const auto& e : diag.errors) joined += "\n  " + e;
    throw memscope::Error("model rejected:" + joined);
  }
  return model;
}

std::unique_ptr<memscope::ExecutionBackend> build_backend(const CliOptions& opts,
                                                          const memscope::PoolManager& pools,
                                                          memscope::sim::SimSystemModel* model_out) {
  if (opts.backend == "sim") {
    auto model = build_model(opts);
    for (std::uint32_t id = 1; id <= pools.size(); ++id) {
      if (model.module_for_pool(id) == nullptr) {
        throw memscope::Error("model does not describe a module for pool " + std::to_string(id) +
                              " (" + pools.pool(id).region().name + ")");
      }
    }
    if (model_out != nullptr) *model_out = model;
    return std::make_unique<memscope::sim::SimBackend>(
        std::move(model), memscope::sim::ranges_from_pools(pools), !opts.trace_path.empty());
  }
  if (!opts.trace_path.empty()) {
    throw memscope::Error("--trace requires the sim backend");
  }
  memscope::native::NativeOptions nopts;
  nopts.cores = opts.cores;
  return std::make_unique<memscope::native::NativeBackend>(nopts);
}

memscope::ExperimentConfig build_config(const CliOptions& opts,
                                        const memscope::sim::SimSystemModel* model) {
  if (opts.exp_line.empty()) throw memscope::Error("--exp is required for this command");
  memscope::ExperimentConfig config = memscope::parse_experiment_line(opts.exp_line);
  if (!opts.counter_sets.empty()) {
    auto [main_events, other_events] = memscope::parse_counter_sets(opts.counter_sets);
    config.counters_main = std::move(main_events);
    config.counters_others = std::move(other_events);
  }
  if (opts.seed_given) config.seed = opts.seed;
  if (model != nullptr) config.nc_mode = model->nc_mode;
  return config;
}

void print_diagnostics(const memscope::Diagnostics& diag) {
  for (const auto& w : diag.warnings) std::cerr << "warning: " << w << "\n";
  for (const auto& e : diag.errors) std::cerr << "error: " << e << "\n";
}

int cmd_pools(const CliOptions& opts) {
  const auto pools = build_pools(opts);
  std::cout << pools.status();
  return kOk;
}

int cmd_validate(const CliOptions& opts) {
  auto pools = build_pools(opts);
  memscope::sim::SimSystemModel model;
  auto backend = build_backend(opts, pools, &model);
  const auto config =
      build_config(opts, opts.backend == "sim" ? &model : nullptr);
  const auto diag = memscope::validate(config, pools, *backend);
  print_diagnostics(diag);
  if (!diag.ok()) return kConfigError;
  std::cout << "configuration ok: " << memscope::render_experiment_line(config) << "\n";
  return kOk;
}

int cmd_run(const CliOptions& opts) {
  auto pools = build_pools(opts);
  memscope::sim::SimSystemModel model;
  auto backend = build_backend(opts, pools, &model);
  const auto config =
      build_config(opts, opts.backend == "sim" ? &model : nullptr);

  const auto diag = memscope::validate(config, pools, *backend);
  print_diagnostics(diag);
  if (!diag.ok()) return kConfigError;

  // Configuration is sound from here on; failures below are runtime ones.
  try {
    const auto result = memscope::run_experiment(config, pools, *backend);
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";

    std::ofstream out(opts.out_path, std::ios::binary | std::ios::trunc);
    if (!out) throw memscope::Error("cannot write '" + opts.out_path + "'");
    out << memscope::write_results_csv(result);
    out.close();
    if (!out) throw memscope::Error("short write to '" + opts.out_path + "'");

    if (!opts.trace_path.empty()) {
      auto* simb = dynamic_cast<memscope::sim::SimBackend*>(backend.get());
      std::ofstream trace_out(opts.trace_path, std::ios::binary | std::ios::trunc);
      if (!trace_out) throw memscope::Error("cannot write '" + opts.trace_path + "'");
      memscope::sim::write_trace_csv(simb->trace(), trace_out);
    }

    std::cout << memscope::format_report(result);
    std::cout << "results written to " << opts.out_path << "\n";
    return kOk;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
}

int cmd_results(const CliOptions& opts) {
  std::ifstream in(opts.out_path, std::ios::binary);
  if (!in) {
    std::cerr << "error: no stored results at '" << opts.out_path << "'\n";
    return kConfigError;
  }
  std::cout << in.rdbuf();
  return kOk;
}

int cmd_erase(const CliOptions& opts) {
  std::ifstream probe(opts.out_path);
  if (!probe) return kOk;  // nothing stored; erasing again is a no-op
  probe.close();
  if (std::remove(opts.out_path.c_str()) != 0) {
    std::cerr << "error: cannot erase '" << opts.out_path << "'\n";
    return kRuntimeError;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"memscope: heterogeneous-memory contention experiments"};
  app.require_subcommand(1);

  CliOptions opts;

  auto add_common = [&opts](CLI::App* cmd, bool with_backend) {
    cmd->add_option("--regions", opts.regions_path,
                    "memory region config file (devicetree subset); built-in layout if omitted");
    cmd->add_option("--exp", opts.exp_line,
                    "experiment line: '<map> <strat> <size> <pool> ; <map> <strat> <size> <pool> "
                    "[iterations [seed]]'");
    cmd->add_option("--counters", opts.counter_sets,
                    "two ';'-separated comma lists of events: observed core; all other cores");
    cmd->add_option("--seed", opts.seed, "chain/delay seed (overrides the experiment line)")
        ->each([&opts](const std::string&) { opts.seed_given = true; });
    cmd->add_option("--model", opts.model_path, "system model file for the sim backend");
    if (with_backend) {
      cmd->add_option("--backend", opts.backend, "execution backend")
          ->check(CLI::IsMember({"sim", "native"}));
      cmd->add_option("--cores", opts.cores, "worker count for the native backend (0 = online)");
    }
  };

  CLI::App* pools_cmd = app.add_subcommand("pools", "print pool layout and free pages");
  pools_cmd->add_option("--regions", opts.regions_path, "memory region config file");

  CLI::App* validate_cmd =
      app.add_subcommand("validate", "check an experiment without running it");
  add_common(validate_cmd, true);

  CLI::App* start_cmd = app.add_subcommand("start", "run an experiment and store results");
  add_common(start_cmd, true);
  start_cmd->add_option("--out", opts.out_path, "results CSV path");
  start_cmd->add_option("--trace", opts.trace_path, "also write the transaction trace (sim only)");

  CLI::App* results_cmd = app.add_subcommand("results", "print the stored results CSV");
  results_cmd->add_option("--out", opts.out_path, "results CSV path");

  CLI::App* erase_cmd = app.add_subcommand("erase", "delete the stored results CSV");
  erase_cmd->add_option("--out", opts.out_path, "results CSV path");

  CLI::App* simulate_cmd =
      app.add_subcommand("simulate", "run an experiment on the deterministic simulator");
  add_common(simulate_cmd, false);
  simulate_cmd->add_option("--out", opts.out_path, "results CSV path");
  simulate_cmd->add_option("--trace", opts.trace_path, "also write the transaction trace");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (pools_cmd->parsed()) return cmd_pools(opts);
    if (validate_cmd->parsed()) return cmd_validate(opts);
    if (start_cmd->parsed()) return cmd_run(opts);
    if (results_cmd->parsed()) return cmd_results(opts);
    if (erase_cmd->parsed()) return cmd_erase(opts);
    if (simulate_cmd->parsed()) {
      opts.backend = "sim";
      return cmd_run(opts);
    }
  } catch (const memscope::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kConfigError;
}
