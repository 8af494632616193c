#include "memscope/experiment_line.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <sstream>

#include "memscope/error.hpp"

namespace memscope {

namespace {

const char* kFieldNames[4] = {"mapping", "strategy", "size", "pool id"};

std::vector<std::string> tokenize(const std::string& text) {
  // ';' is a hard separator even when glued to a neighbour token.
  std::string spaced;
  spaced.reserve(text.size() + 2);
  for (char c : text) {
    if (c == ';') {
      spaced += " ; ";
    } else {
      spaced += c;
    }
  }
  std::istringstream in(spaced);
  std::vector<std::string> tokens;
  std::string tok;
  while (in >> tok) tokens.push_back(tok);
  return tokens;
}

std::uint64_t parse_u64(const std::string& tok, const std::string& what) {
  if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos) {
    throw Error(what + ": expected a number, got '" + tok + "'");
  }
  try {
    return std::stoull(tok);
  } catch (const std::out_of_range&) {
    throw Error(what + ": value '" + tok + "' out of range");
  }
}

ActivitySpec parse_entry(const std::vector<std::string>& fields, const std::string& which) {
  if (fields.size() < 4) {
    throw Error(which + " entry: missing field " + std::to_string(fields.size() + 1) + " (" +
                kFieldNames[fields.size()] + ")");
  }

  ActivitySpec spec;
  const std::string& mapping = fields[0];
  if (mapping.size() != 1) {
    throw Error(which + " entry: field 1 (mapping) expects a single letter, got '" + mapping +
                "'");
  }
  if (mapping[0] != 'c') {
    throw Error(which + " entry: field 1 (mapping): '" + mapping +
                "' is reserved; only 'c' (cacheable) is implemented");
  }
  spec.mapping = 'c';

  const std::string& strat = fields[1];
  if (strat.size() != 1) {
    throw Error(which + " entry: field 2 (strategy) expects a single letter, got '" + strat +
                "'");
  }
  try {
    spec.strategy = strategy_from_code(strat[0]);
  } catch (const Error& e) {
    throw Error(which + " entry: field 2 (strategy): " + e.what());
  }

  try {
    spec.buffer_bytes = parse_size_bytes(fields[2]);
  } catch (const Error& e) {
    throw Error(which + " entry: field 3 (size): " + e.what());
  }

  const std::uint64_t pool = parse_u64(fields[3], which + " entry: field 4 (pool id)");
  if (pool == 0 || pool > 0xffffffffull) {
    throw Error(which + " entry: field 4 (pool id): '" + fields[3] + "' is out of range");
  }
  spec.pool_id = static_cast<std::uint32_t>(pool);
  return spec;
}

}  // namespace

std::uint64_t parse_size_bytes(const std::string& token) {
  if (token.empty()) throw Error("empty size");
  std::uint64_t scale = 1;
  std::string digits = token;
  const char last = token.back();
  if (!std::isdigit(static_cast<unsigned char>(last))) {
    switch (last) {
      case 'K': case 'k': scale = 1ull << 10; break;
      case 'M': case 'm': scale = 1ull << 20; break;
      case 'G': case 'g': scale = 1ull << 30; break;
      default:
        throw Error(std::string("unknown size suffix '") + last + "' in '" + token + "'");
    }
    digits.pop_back();
  }
  if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos) {
    throw Error("malformed size '" + token + "'");
  }
  std::uint64_t value = 0;
  try {
    value = std::stoull(digits);
  } catch (const std::out_of_range&) {
    throw Error("size '" + token + "' out of range");
  }
  if (value != 0 && value > UINT64_MAX / scale) {
    throw Error("size '" + token + "' out of range");
  }
  return value * scale;
}

std::string render_size_bytes(std::uint64_t bytes) {
  if (bytes >= (1ull << 30) && bytes % (1ull << 30) == 0)
    return std::to_string(bytes >> 30) + "G";
  if (bytes >= (1ull << 20) && bytes % (1ull << 20) == 0)
    return std::to_string(bytes >> 20) + "M";
  if (bytes >= (1ull << 10) && bytes % (1ull << 10) == 0)
    return std::to_string(bytes >> 10) + "K";
  return std::to_string(bytes);
}

ExperimentConfig parse_experiment_line(const std::string& text) {
  const std::vector<std::string> tokens = tokenize(text);

  std::size_t sep = tokens.size();
  std::size_t seps = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] == ";") {
      if (seps == 0) sep = i;
      ++seps;
    }
  }
  if (seps != 1) {
    throw Error("expected exactly one ';' between the main and stress entries, found " +
                std::to_string(seps));
  }

  const std::vector<std::string> main_fields(tokens.begin(), tokens.begin() + sep);
  if (main_fields.size() > 4) {
    throw Error("main entry: unexpected extra field 5 '" + main_fields[4] + "'");
  }
  std::vector<std::string> rest(tokens.begin() + sep + 1, tokens.end());
  std::vector<std::string> stress_fields(rest.begin(),
                                         rest.begin() + std::min<std::size_t>(rest.size(), 4));

  ExperimentConfig config;
  config.main = parse_entry(main_fields, "main");
  config.stress = parse_entry(stress_fields, "stress");

  if (rest.size() > 4) {
    config.iterations = parse_u64(rest[4], "iterations");
    if (config.iterations == 0) throw Error("iterations: must be at least 1");
  }
  if (rest.size() > 5) config.seed = parse_u64(rest[5], "seed");
  if (rest.size() > 6) {
    throw Error("unexpected trailing field '" + rest[6] + "' after seed");
  }
  return config;
}

std::string render_experiment_line(const ExperimentConfig& config) {
  std::ostringstream out;
  auto entry = [&out](const ActivitySpec& a) {
    out << a.mapping << ' ' << strategy_code(a.strategy) << ' '
        << render_size_bytes(a.buffer_bytes) << ' ' << a.pool_id;
  };
  entry(config.main);
  out << " ; ";
  entry(config.stress);
  out << ' ' << config.iterations << ' ' << config.seed;
  return out.str();
}

std::pair<std::vector<std::string>, std::vector<std::string>> parse_counter_sets(
    const std::string& text) {
  std::size_t seps = 0;
  std::size_t sep = std::string::npos;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == ';') {
      if (seps == 0) sep = i;
      ++seps;
    }
  }
  if (seps != 1) {
    throw Error("counter sets: expected exactly one ';' between the two event lists, found " +
                std::to_string(seps));
  }

  auto split_list = [](const std::string& part) {
    std::vector<std::string> events;
    std::string item;
    std::istringstream in(part);
    while (std::getline(in, item, ',')) {
      // Trim surrounding blanks; drop empty items so `;` and `a,;b` behave.
      const auto begin = item.find_first_not_of(" \t");
      if (begin == std::string::npos) continue;
      const auto end = item.find_last_not_of(" \t");
      events.push_back(item.substr(begin, end - begin + 1));
    }
    return events;
  };

  return {split_list(text.substr(0, sep)), split_list(text.substr(sep + 1))};
}

}  // namespace memscope
