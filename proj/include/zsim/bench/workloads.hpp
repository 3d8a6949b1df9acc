#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "zsim/bench/gen.hpp"
#include "zsim/engine/engine.hpp"

namespace zsim::bench {

enum class Kind { CopyAvoidance, SameInput, ReshareSuite, Chain, Branchout, Mix, ThreadSweep };

// Throws UsageError.
Kind parse_kind(std::string_view s);
std::string_view to_string(Kind k);

struct WorkloadSpec {
  Kind kind = Kind::Chain;
  double scale = 0.001;   // fraction of the full-size workload
  uint32_t parallel = 0;  // DAG count (Mix: worker slots, ThreadSweep: max threads); 0 picks the kind default
  double compute_units = 1.0;
  uint64_t seed = 42;
  uint32_t chain_length = 10;  // functions per chain, loader included
  std::string op;              // ReshareSuite: run only this op
};

struct RunConfig {
  engine::EngineConfig engine;
  std::optional<uint64_t> mem_limit;  // unset: kind default
  std::string work_dir;               // generated sources; empty: a temp directory
};

struct BenchRun {
  std::string label;
  nlohmann::ordered_json params;
  engine::MetricsReport report;
};

// Sizes derived from the scale.
struct Sizes {
  uint64_t column_rows;  // rows of a 1 GiB (scaled) Int64 column
  uint64_t table_bytes;  // CopyAvoidance table
  uint64_t mem_limit;    // default memory limit
};
Sizes sizes(double scale);

// Writes the source if it does not exist yet; returns its path.
std::string ensure_source(const GenSpec& spec, const std::string& work_dir);

// One chain: loader of a two-column source, then add-column nodes, each
// appending one Int64 column.
rm::DagSpec chain_dag(const std::string& name, const std::string& source, uint64_t rows, uint32_t length);
// Loader root with a binary tree of add-column nodes below it.
rm::DagSpec branchout_dag(const std::string& name, const std::string& source, uint64_t rows, uint32_t depth);

std::vector<std::string> reshare_ops();

// Runs the kind under one configuration; some kinds yield several runs.
std::vector<BenchRun> run_bench(const WorkloadSpec& spec, const RunConfig& cfg);

}  // namespace zsim::bench
