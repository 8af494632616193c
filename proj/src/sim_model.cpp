#include "memscope/sim/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "memscope/error.hpp"

namespace memscope::sim {
namespace {

struct KeyValue {
  std::string key;
  std::string value;
  int line;
};

std::string trim(std::string_view s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<KeyValue> split_lines(std::string_view text) {
  std::vector<KeyValue> out;
  int line_no = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == std::string_view::npos ? nl : nl - pos);
    pos = (nl == std::string_view::npos) ? text.size() + 1 : nl + 1;
    ++line_no;

    if (size_t hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    std::string line = trim(raw);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(line_no, "expected 'key = value'");
    std::string key = trim(std::string_view(line).substr(0, eq));
    std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty() || value.empty()) throw ParseError(line_no, "expected 'key = value'");
    out.push_back({std::move(key), std::move(value), line_no});
  }
  return out;
}

std::uint64_t parse_u64(const KeyValue& kv) {
  char* end = nullptr;
  const std::uint64_t v = std::strtoull(kv.value.c_str(), &end, 0);
  if (end == kv.value.c_str() || *end != '\0')
    throw ParseError(kv.line, "'" + kv.key + "' wants an integer, got '" + kv.value + "'");
  return v;
}

double parse_double(const KeyValue& kv) {
  char* end = nullptr;
  const double v = std::strtod(kv.value.c_str(), &end);
  if (end == kv.value.c_str() || *end != '\0')
    throw ParseError(kv.line, "'" + kv.key + "' wants a number, got '" + kv.value + "'");
  return v;
}

bool parse_bool(const KeyValue& kv) {
  if (kv.value == "true" || kv.value == "1") return true;
  if (kv.value == "false" || kv.value == "0") return false;
  throw ParseError(kv.line, "'" + kv.key + "' wants true/false");
}

// "module.<pool>.<field>" / "cache.partition.<core>" style key tails.
bool split_indexed(const std::string& key, const std::string& prefix, std::uint32_t& index,
                   std::string& field) {
  if (key.rfind(prefix, 0) != 0) return false;
  std::string rest = key.substr(prefix.size());
  size_t dot = rest.find('.');
  std::string idx = (dot == std::string::npos) ? rest : rest.substr(0, dot);
  if (idx.empty() || idx.find_first_not_of("0123456789") != std::string::npos) return false;
  index = static_cast<std::uint32_t>(std::strtoul(idx.c_str(), nullptr, 10));
  field = (dot == std::string::npos) ? "" : rest.substr(dot + 1);
  return true;
}

ModuleModel& module_slot(SimSystemModel& m, std::uint32_t pool_id) {
  for (auto& mod : m.modules) {
    if (mod.pool_id == pool_id) return mod;
  }
  ModuleModel mod;
  mod.pool_id = pool_id;
  mod.name = "module" + std::to_string(pool_id);
  m.modules.push_back(mod);
  std::sort(m.modules.begin(), m.modules.end(),
            [](const ModuleModel& a, const ModuleModel& b) { return a.pool_id < b.pool_id; });
  for (auto& it : m.modules) {
    if (it.pool_id == pool_id) return it;
  }
  throw Error("unreachable");
}

}  // namespace

const ModuleModel* SimSystemModel::module_for_pool(std::uint32_t pool_id) const {
  for (const auto& m : modules) {
    if (m.pool_id == pool_id) return &m;
  }
  return nullptr;
}

SimSystemModel parse_model(std::string_view text) {
  SimSystemModel m = default_model();
  m.modules.clear();  // a model file declares its own module set

  for (const auto& kv : split_lines(text)) {
    const std::string& k = kv.key;
    std::uint32_t idx = 0;
    std::string field;

    if (k == "cores") {
      m.cores = static_cast<std::uint32_t>(parse_u64(kv));
    } else if (k == "cpu_freq_ghz") {
      const double ghz = parse_double(kv);
      if (ghz <= 0.0) throw ParseError(kv.line, "cpu_freq_ghz must be positive");
      m.cpu_cycles_per_us = static_cast<std::uint32_t>(std::llround(ghz * 1000.0));
    } else if (k == "core_issue_depth") {
      m.core_issue_depth = static_cast<std::uint32_t>(parse_u64(kv));
    } else if (k == "bus.queue_entries") {
      m.bus_queue_entries = (kv.value == "unlimited")
                                ? kUnlimitedQueue
                                : static_cast<std::uint32_t>(parse_u64(kv));
    } else if (k == "cache.present") {
      m.cache.present = parse_bool(kv);
    } else if (k == "cache.size_bytes") {
      m.cache.size_bytes = parse_u64(kv);
    } else if (k == "cache.ways") {
      m.cache.ways = static_cast<std::uint32_t>(parse_u64(kv));
    } else if (k == "cache.line_bytes") {
      m.cache.line_bytes = parse_u64(kv);
    } else if (k == "cache.hit_latency_ns") {
      m.cache.hit_latency_ns = parse_u64(kv);
    } else if (k == "cache.hit_port_slots") {
      m.cache.hit_port_slots = static_cast<std::uint32_t>(parse_u64(kv));
    } else if (split_indexed(k, "cache.partition_base.", idx, field) && field.empty()) {
      m.cache.partition_base[idx] = parse_double(kv);
    } else if (split_indexed(k, "cache.partition.", idx, field) && field.empty()) {
      m.cache.partition_fraction[idx] = parse_double(kv);
    } else if (split_indexed(k, "module.", idx, field)) {
      ModuleModel& mod = module_slot(m, idx);
      if (field == "name") {
        mod.name = kv.value;
      } else if (field == "latency_ns") {
        mod.latency_ns = parse_u64(kv);
      } else if (field == "mlp_cap") {
        mod.mlp_cap = static_cast<std::uint32_t>(parse_u64(kv));
      } else {
        throw ParseError(kv.line, "unknown module field '" + field + "'");
      }
    } else if (k == "nc_mode") {
      if (kv.value == "dcadd") {
        m.nc_mode = NcMode::dcadd;
      } else if (kv.value == "dcafter") {
        m.nc_mode = NcMode::dcafter;
      } else {
        throw ParseError(kv.line, "nc_mode wants dcadd or dcafter");
      }
    } else {
      throw ParseError(kv.line, "unknown key '" + k + "'");
    }
  }
  return m;
}

std::string render_model(const SimSystemModel& m) {
  std::string out;
  char buf[128];
  auto add = [&](const char* key, std::uint64_t v) {
    std::snprintf(buf, sizeof(buf), "%s = %llu\n", key, static_cast<unsigned long long>(v));
    out += buf;
  };
  add("cores", m.cores);
  std::snprintf(buf, sizeof(buf), "cpu_freq_ghz = %g\n", m.cpu_cycles_per_us / 1000.0);
  out += buf;
  add("core_issue_depth", m.core_issue_depth);
  if (m.bus_queue_entries == kUnlimitedQueue) {
    out += "bus.queue_entries = unlimited\n";
  } else {
    add("bus.queue_entries", m.bus_queue_entries);
  }
  out += std::string("cache.present = ") + (m.cache.present ? "true" : "false") + "\n";
  add("cache.size_bytes", m.cache.size_bytes);
  add("cache.ways", m.cache.ways);
  add("cache.line_bytes", m.cache.line_bytes);
  add("cache.hit_latency_ns", m.cache.hit_latency_ns);
  add("cache.hit_port_slots", m.cache.hit_port_slots);
  for (const auto& [core, frac] : m.cache.partition_fraction) {
    std::snprintf(buf, sizeof(buf), "cache.partition.%u = %g\n", core, frac);
    out += buf;
  }
  for (const auto& [core, base] : m.cache.partition_base) {
    std::snprintf(buf, sizeof(buf), "cache.partition_base.%u = %g\n", core, base);
    out += buf;
  }
  for (const auto& mod : m.modules) {
    std::snprintf(buf, sizeof(buf), "module.%u.name = %s\n", mod.pool_id, mod.name.c_str());
    out += buf;
    std::snprintf(buf, sizeof(buf), "module.%u.latency_ns = %llu\n", mod.pool_id,
                  static_cast<unsigned long long>(mod.latency_ns));
    out += buf;
    std::snprintf(buf, sizeof(buf), "module.%u.mlp_cap = %u\n", mod.pool_id, mod.mlp_cap);
    out += buf;
  }
  out += std::string("nc_mode = ") + (m.nc_mode == NcMode::dcadd ? "dcadd" : "dcafter") + "\n";
  return out;
}

SimSystemModel default_model() {
  SimSystemModel m;
  m.cores = 4;
  m.cpu_cycles_per_us = 1500;
  m.bus_queue_entries = 8;
  m.core_issue_depth = 8;
  m.cache.present = true;
  m.cache.size_bytes = 1ull << 20;
  m.cache.ways = 16;
  m.cache.line_bytes = 64;
  m.cache.hit_latency_ns = 3;
  m.cache.hit_port_slots = 1;
  m.modules = {
      {1, "dram", 160, 5},
      {2, "pldram", 400, 4},
      {3, "bram", 100, 1},
      {4, "ocm", 60, 2},
  };
  m.nc_mode = NcMode::dcadd;
  return m;
}

ModelDiagnostics validate_model(const SimSystemModel& m) {
  ModelDiagnostics d;
  auto err = [&](std::string s) { d.errors.push_back(std::move(s)); };
  auto warn = [&](std::string s) { d.warnings.push_back(std::move(s)); };

  if (m.cores == 0) err("core count must be positive");
  if (m.cpu_cycles_per_us == 0) err("cpu frequency must be positive");
  if (m.core_issue_depth == 0) err("core_issue_depth must be at least 1");
  if (m.modules.empty()) err("model declares no memory modules");
  std::uint32_t max_mlp = 0;
  for (const auto& mod : m.modules) {
    if (mod.latency_ns == 0)
      err("module " + std::to_string(mod.pool_id) + ": latency must be positive");
    if (mod.mlp_cap == 0)
      err("module " + std::to_string(mod.pool_id) + ": mlp_cap must be at least 1");
    max_mlp = std::max(max_mlp, mod.mlp_cap);
  }
  if (m.bus_queue_entries == 0) err("bus queue needs at least one entry (or 'unlimited')");
  if (m.bus_queue_entries != kUnlimitedQueue && m.bus_queue_entries < max_mlp)
    warn("bus queue (" + std::to_string(m.bus_queue_entries) +
         " entries) is shallower than the widest module (mlp_cap " + std::to_string(max_mlp) +
         "); the queue will cap module concurrency");

  if (m.cache.present) {
    const auto& c = m.cache;
    if (c.line_bytes == 0 || (c.line_bytes & (c.line_bytes - 1)) != 0) {
      err("cache line size must be a power of two");
    } else if (c.ways == 0 || c.size_bytes == 0 || c.size_bytes % (c.line_bytes * c.ways) != 0) {
      err("cache size must be a whole number of sets (size = sets * ways * line)");
    } else {
      const std::uint32_t sets = c.sets();
      if ((sets & (sets - 1)) != 0) err("cache set count must be a power of two");
      for (const auto& [core, frac] : c.partition_fraction) {
        if (core >= m.cores) {
          err("cache partition for core " + std::to_string(core) + " but only " +
              std::to_string(m.cores) + " cores");
          continue;
        }
        if (!(frac > 0.0 && frac <= 1.0)) {
          err("cache partition fraction for core " + std::to_string(core) + " must be in (0, 1]");
          continue;
        }
        double base = 0.0;
        if (auto it = c.partition_base.find(core); it != c.partition_base.end()) base = it->second;
        if (base < 0.0 || base >= 1.0) {
          err("cache partition base for core " + std::to_string(core) + " must be in [0, 1)");
        } else if (base + frac > 1.0 + 1e-9) {
          err("cache partition band for core " + std::to_string(core) +
              " runs past the end of the index range");
        }
      }
      for (const auto& [core, base] : c.partition_base) {
        (void)base;
        if (c.partition_fraction.find(core) == c.partition_fraction.end())
          warn("partition_base for core " + std::to_string(core) +
               " has no matching partition fraction and is ignored");
      }
    }
    if (c.hit_port_slots == 0) err("cache hit port needs at least one slot");
  }
  return d;
}

}  // namespace memscope::sim
