#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "memscope/coordinator.hpp"

namespace memscope {

// Order statistics over one metric. Quartiles use linear interpolation at
// position p*(n-1), the common "R-7" rule.
struct MetricSummary {
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::size_t n = 0;
};

MetricSummary summarize(std::vector<double> values);

// Per-iteration bandwidth in bytes per nanosecond (numerically equal to
// GB/s): bytes_per_iteration / elapsed_i.
std::vector<double> bandwidth_of(const ScenarioResult& sr);

// Per-iteration latency in ns per line transaction: elapsed_i / lines.
std::vector<double> latency_of(const ScenarioResult& sr);

MetricSummary bandwidth_summary(const ScenarioResult& sr);
MetricSummary latency_summary(const ScenarioResult& sr);

// Little's law: concurrency sustained by a stream equals average latency
// times average throughput. Latency in ns per transaction, bandwidth in
// transactions per ns; the result is rounded to two decimals.
double mlp(double avg_latency_ns, double avg_bandwidth_tx_per_ns);

double bytes_per_ns_to_tx_per_ns(double bytes_per_ns);

// (1 - refills/accesses) * 100, two decimals.
double hit_rate_percent(std::uint64_t cache_accesses, std::uint64_t refills);

// cycles/accesses, two decimals.
double cycles_per_access(std::uint64_t cycles, std::uint64_t accesses);

double round2(double v);

// Human-readable per-scenario report (the `results`/`start` table).
struct ReportRow {
  std::uint32_t scenario = 0;
  std::uint32_t stressors = 0;
  MetricSummary bandwidth_mbps;  // MB/s = bytes/ns * 1000
  MetricSummary latency_ns;
  std::map<std::uint32_t, std::map<std::string, std::uint64_t>> counters;
};

std::vector<ReportRow> summarize_experiment(const ExperimentResult& result);
std::string format_report(const ExperimentResult& result);

// Fixed results schema. Columns:
//   scenario,stressors,strategy_main,strategy_stress,pool_main,pool_stress,
//   buffer_bytes,iterations,bw_med_MBps,lat_med_ns,
//   then one <event>_core<k> column per configured counter, cores ascending.
// The header row is always present.
std::string write_results_csv(const ExperimentResult& result);

struct ResultsCsv {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

// Parses what write_results_csv produced (quoting-free CSV). Throws Error on
// a missing header or ragged rows.
ResultsCsv parse_results_csv(const std::string& text);

}  // namespace memscope
