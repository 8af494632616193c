#include "memscope/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "memscope/error.hpp"

namespace memscope {

double round2(double v) { return std::round(v * 100.0) / 100.0; }

namespace {

double interpolate(const std::vector<double>& sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[lo + 1] - sorted[lo]) * frac;
}

}  // namespace

MetricSummary summarize(std::vector<double> values) {
  if (values.empty()) throw Error("cannot summarize an empty sample");
  std::sort(values.begin(), values.end());
  MetricSummary s;
  s.n = values.size();
  s.min = values.front();
  s.max = values.back();
  s.q1 = interpolate(values, 0.25);
  s.median = interpolate(values, 0.5);
  s.q3 = interpolate(values, 0.75);
  return s;
}

std::vector<double> bandwidth_of(const ScenarioResult& sr) {
  std::vector<double> out;
  out.reserve(sr.elapsed_ns.size());
  for (const std::uint64_t ns : sr.elapsed_ns) {
    if (ns == 0) throw Error("zero-length iteration in scenario results");
    out.push_back(static_cast<double>(sr.bytes_per_iteration) / static_cast<double>(ns));
  }
  return out;
}

std::vector<double> latency_of(const ScenarioResult& sr) {
  if (sr.lines_per_iteration == 0) throw Error("scenario has no per-iteration accesses");
  std::vector<double> out;
  out.reserve(sr.elapsed_ns.size());
  for (const std::uint64_t ns : sr.elapsed_ns) {
    out.push_back(static_cast<double>(ns) / static_cast<double>(sr.lines_per_iteration));
  }
  return out;
}

MetricSummary bandwidth_summary(const ScenarioResult& sr) { return summarize(bandwidth_of(sr)); }
MetricSummary latency_summary(const ScenarioResult& sr) { return summarize(latency_of(sr)); }

double mlp(double avg_latency_ns, double avg_bandwidth_tx_per_ns) {
  return round2(avg_latency_ns * avg_bandwidth_tx_per_ns);
}

double bytes_per_ns_to_tx_per_ns(double bytes_per_ns) {
  return bytes_per_ns / static_cast<double>(kCacheLineBytes);
}

double hit_rate_percent(std::uint64_t cache_accesses, std::uint64_t refills) {
  if (cache_accesses == 0) throw Error("hit rate over zero accesses");
  if (refills > cache_accesses) {
    throw Error("hit rate undefined: " + std::to_string(refills) + " refills against " +
                std::to_string(cache_accesses) + " accesses");
  }
  const double miss =
      static_cast<double>(refills) / static_cast<double>(cache_accesses);
  return round2((1.0 - miss) * 100.0);
}

double cycles_per_access(std::uint64_t cycles, std::uint64_t accesses) {
  if (accesses == 0) throw Error("cycles per access over zero accesses");
  return round2(static_cast<double>(cycles) / static_cast<double>(accesses));
}

std::vector<ReportRow> summarize_experiment(const ExperimentResult& result) {
  std::vector<ReportRow> rows;
  rows.reserve(result.scenarios.size());
  for (const auto& sr : result.scenarios) {
    ReportRow row;
    row.scenario = sr.scenario_index;
    row.stressors = sr.stressors;
    MetricSummary bw = bandwidth_summary(sr);
    // bytes/ns -> MB/s.
    for (double* v : {&bw.median, &bw.q1, &bw.q3, &bw.min, &bw.max}) *v *= 1000.0;
    row.bandwidth_mbps = bw;
    row.latency_ns = latency_summary(sr);
    row.counters = sr.counter_deltas;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_report(const ExperimentResult& result) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "backend=%s cores=%u iterations=%llu seed=%llu\n",
                result.backend.c_str(), result.cores,
                static_cast<unsigned long long>(result.config.iterations),
                static_cast<unsigned long long>(result.config.seed));
  out += buf;
  std::snprintf(buf, sizeof(buf), "main: %c %s %llu bytes pool %u | stress: %c %s %llu bytes pool %u\n",
                strategy_code(result.config.main.strategy),
                strategy_name(result.config.main.strategy).c_str(),
                static_cast<unsigned long long>(result.config.main.buffer_bytes),
                result.config.main.pool_id, strategy_code(result.config.stress.strategy),
                strategy_name(result.config.stress.strategy).c_str(),
                static_cast<unsigned long long>(result.config.stress.buffer_bytes),
                result.config.stress.pool_id);
  out += buf;
  out += "scenario stressors    bw_med(MB/s)      lat_med(ns)   [q1..q3] lat\n";
  for (const auto& sr : result.scenarios) {
    const MetricSummary bw = bandwidth_summary(sr);
    const MetricSummary lat = latency_summary(sr);
    std::snprintf(buf, sizeof(buf), "%8u %9u %15.3f %16.3f   [%.3f..%.3f]\n", sr.scenario_index,
                  sr.stressors, bw.median * 1000.0, lat.median, lat.q1, lat.q3);
    out += buf;
  }
  for (const auto& w : result.warnings) out += "warning: " + w + "\n";
  for (const auto& sr : result.scenarios) {
    for (const auto& w : sr.warnings)
      out += "warning (scenario " + std::to_string(sr.scenario_index) + "): " + w + "\n";
  }
  return out;
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

// Counter columns are fixed by the configuration so every row has the same
// shape: cores ascending, each with its configured event list.
std::vector<std::pair<std::uint32_t, std::string>> counter_columns(
    const ExperimentResult& result) {
  std::vector<std::pair<std::uint32_t, std::string>> cols;
  for (std::uint32_t c = 0; c < result.cores; ++c) {
    const auto& events = (c == result.config.observed_core) ? result.config.counters_main
                                                            : result.config.counters_others;
    for (const auto& ev : events) cols.emplace_back(c, ev);
  }
  return cols;
}

}  // namespace

std::string write_results_csv(const ExperimentResult& result) {
  std::string out =
      "scenario,stressors,strategy_main,strategy_stress,pool_main,pool_stress,"
      "buffer_bytes,iterations,bw_med_MBps,lat_med_ns";
  const auto cols = counter_columns(result);
  for (const auto& [core, ev] : cols) {
    out += "," + ev + "_core" + std::to_string(core);
  }
  out += "\n";

  for (const auto& sr : result.scenarios) {
    const MetricSummary bw = bandwidth_summary(sr);
    const MetricSummary lat = latency_summary(sr);
    out += std::to_string(sr.scenario_index);
    out += "," + std::to_string(sr.stressors);
    out += std::string(",") + strategy_code(result.config.main.strategy);
    out += std::string(",") + strategy_code(result.config.stress.strategy);
    out += "," + std::to_string(result.config.main.pool_id);
    out += "," + std::to_string(result.config.stress.pool_id);
    out += "," + std::to_string(result.config.main.buffer_bytes);
    out += "," + std::to_string(result.config.iterations);
    out += "," + fmt_double(bw.median * 1000.0);
    out += "," + fmt_double(lat.median);
    for (const auto& [core, ev] : cols) {
      out += ",";
      auto cit = sr.counter_deltas.find(core);
      if (cit == sr.counter_deltas.end()) continue;
      auto eit = cit->second.find(ev);
      if (eit == cit->second.end()) continue;
      out += std::to_string(eit->second);
    }
    out += "\n";
  }
  return out;
}

ResultsCsv parse_results_csv(const std::string& text) {
  ResultsCsv csv;
  std::size_t pos = 0;
  bool header = true;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    const std::string line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.empty()) continue;

    std::vector<std::string> fields;
    std::size_t f = 0;
    while (true) {
      std::size_t comma = line.find(',', f);
      if (comma == std::string::npos) {
        fields.push_back(line.substr(f));
        break;
      }
      fields.push_back(line.substr(f, comma - f));
      f = comma + 1;
    }
    if (header) {
      csv.columns = std::move(fields);
      if (csv.columns.empty() || csv.columns[0] != "scenario")
        throw Error("results file lacks the expected header");
      header = false;
    } else {
      if (fields.size() != csv.columns.size())
        throw Error("results row has " + std::to_string(fields.size()) + " fields, header has " +
                    std::to_string(csv.columns.size()));
      csv.rows.push_back(std::move(fields));
    }
  }
  if (header) throw Error("results file is empty");
  return csv;
}

}  // namespace memscope
