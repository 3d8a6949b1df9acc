#pragma once

#include <string>
#include <vector>

#include "zsim/bench/workloads.hpp"

namespace zsim::bench {

enum class Format { Json, Csv };

// Throws UsageError.
Format parse_format(std::string_view s);

nlohmann::ordered_json to_json(const std::vector<BenchRun>& runs);
std::string to_csv(const std::vector<BenchRun>& runs);
std::vector<std::string> csv_header();
// Empty path writes to stdout. Throws IoError.
void emit(const std::vector<BenchRun>& runs, Format format, const std::string& path);

}  // namespace zsim::bench
