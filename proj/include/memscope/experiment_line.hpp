#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "memscope/coordinator.hpp"

namespace memscope {

// Parses a positional experiment line:
//
//   <mapping> <strategy> <size> <pool> ; <mapping> <strategy> <size> <pool> [iterations [seed]]
//
// e.g. `c r 4M 2 ; c w 4M 2` or `c l 4M 2 ; c r 4M 3 200 7`. The first entry
// describes the observed activity, the second the stressor activity. Sizes
// take K/M/G suffixes (powers of 1024). Errors name the offending field.
ExperimentConfig parse_experiment_line(const std::string& text);

// Canonical text for a config; parse(render(parse(x))) == parse(x).
std::string render_experiment_line(const ExperimentConfig& config);

// `4M` -> 4194304. Throws on empty input, junk, overflow.
std::uint64_t parse_size_bytes(const std::string& token);
std::string render_size_bytes(std::uint64_t bytes);

// Splits `a,b;c` into ([a,b],[c]): first list for the observed core, second
// for every other core. Exactly one ';'. `;` alone selects no counters.
std::pair<std::vector<std::string>, std::vector<std::string>> parse_counter_sets(
    const std::string& text);

}  // namespace memscope
