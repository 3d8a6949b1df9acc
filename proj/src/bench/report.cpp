#include "zsim/bench/report.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include <fmt/format.h>

#include "zsim/util/error.hpp"

namespace zsim::bench {

Format parse_format(std::string_view s) {
  if (s == "json") return Format::Json;
  if (s == "csv") return Format::Csv;
  fail(ErrorCode::UsageError, fmt::format("unknown format '{}'", s));
}

nlohmann::ordered_json to_json(const std::vector<BenchRun>& runs) {
  auto arr = nlohmann::ordered_json::array();
  for (auto& r : runs) {
    nlohmann::ordered_json j;
    j["label"] = r.label;
    j["params"] = r.params;
    j["metrics"] = r.report.to_json();
    arr.push_back(std::move(j));
  }
  nlohmann::ordered_json out;
  out["runs"] = std::move(arr);
  return out;
}

std::vector<std::string> csv_header() {
  return {"label",          "kind",           "variant",           "policy",
          "trigger",        "overcommit_pct", "compute_units",     "scale",
          "parallel",       "mem_limit",      "seed",              "op",
          "threads",        "loads_executed", "nodes_executed",    "nodes_rerun",
          "cache_hits",     "deadlocks_resolved", "overcommits",   "rollbacks",
          "limit_drops",    "uncached_entries", "new_output_bytes", "bytes_copied",
          "bytes_swapped_out", "bytes_swapped_in", "swap_in_events", "deanon_calls",
          "pages_transferred", "modeled_swap_seconds", "makespan_modeled_s", "makespan_wall_s",
          "stuck"};
}

namespace {

std::string cell(const nlohmann::ordered_json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) {
    auto s = v.get<std::string>();
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  }
  return v.dump();
}

}  // namespace

std::string to_csv(const std::vector<BenchRun>& runs) {
  auto header = csv_header();
  std::ostringstream os;
  for (size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
  os << '\n';
  for (auto& r : runs) {
    auto m = r.report.to_json();
    auto flat = m;
    flat.erase("counters");
    for (auto& [k, v] : m["counters"].items()) flat[k] = v;
    for (size_t i = 0; i < header.size(); ++i) {
      const auto& h = header[i];
      nlohmann::ordered_json v;
      if (h == "label") v = r.label;
      else if (r.params.contains(h)) v = r.params[h];
      else if (flat.contains(h)) v = flat[h];
      os << (i ? "," : "") << cell(v);
    }
    os << '\n';
  }
  return os.str();
}

void emit(const std::vector<BenchRun>& runs, Format format, const std::string& path) {
  std::string text = format == Format::Json ? to_json(runs).dump(2) + "\n" : to_csv(runs);
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(path);
  if (!f) fail(ErrorCode::IoError, fmt::format("cannot write '{}'", path));
  f << text;
  if (!f) fail(ErrorCode::IoError, fmt::format("write to '{}' failed", path));
}

}  // namespace zsim::bench
