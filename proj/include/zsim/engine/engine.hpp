#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "zsim/decache/decache.hpp"
#include "zsim/memstore/store.hpp"
#include "zsim/rm/rm.hpp"
#include "zsim/sipc/sipc.hpp"

namespace zsim::engine {

// Modeled cost of a node run, in seconds. Nodes execute instantly in-process;
// the scheduler clock advances by these modeled latencies.
struct CostModel {
  double compute_bw = 1e9;       // bytes of produced data per second per compute unit
  double decode_bw = 2.5e8;      // loader decode rate per thread
  double copy_bw = 2e9;          // memcpy rate for counted copies
  double deanon_page_s = 2e-7;   // page-table work per transferred page
  double node_overhead_s = 2e-4; // sandbox setup, IPC open, bookkeeping
};

struct EngineConfig {
  mem::StoreConfig store;
  rm::PolicyConfig policy;
  bool baseline = false;     // writer copies, no DeCache
  bool use_decache = true;
  uint32_t workers = 8;      // concurrent node slots
  unsigned load_threads = 4;
  double compute_units = 1.0;
  CostModel cost;
  uint64_t inline_threshold = 0;
  std::string trace_path;    // JSON lines; empty disables
};

struct NodeRecord {
  std::string dag;
  uint32_t node = 0;
  uint32_t run = 0;
  double start_s = 0;
  double latency_s = 0;
  uint64_t new_bytes = 0;
};

struct MetricsReport {
  mem::MemCounters counters;
  uint64_t loads_executed = 0;
  uint64_t nodes_executed = 0;
  uint64_t nodes_rerun = 0;
  uint64_t cache_hits = 0;
  uint64_t deadlocks_resolved = 0;
  uint64_t overcommits = 0;
  uint64_t rollbacks = 0;
  uint64_t limit_drops = 0;
  uint64_t uncached_entries = 0;
  uint64_t new_output_bytes = 0;  // new segment bytes plus sink bytes over all runs
  double makespan_wall_s = 0;
  double makespan_modeled_s = 0;  // compute span plus all modeled swap seconds
  bool stuck = false;  // WorkloadStuck
  uint64_t live_segments_after = 0;
  std::vector<NodeRecord> nodes;

  nlohmann::ordered_json to_json() const;
};

// Called after each node completes with the table read back from its sink.
using Observer = std::function<void(const std::string& dag, const rm::NodeSpec&, const col::Table&)>;

struct NodeResult {
  sipc::StoredOutput output;
  double latency_s = 0;  // excludes swap time
  double swap_s = 0;     // modeled swap time caused by the run
  uint64_t work_bytes = 0;
};

class Engine {
 public:
  explicit Engine(EngineConfig cfg);

  mem::Store& store() { return store_; }
  dc::DeCache* cache() { return cfg_.use_decache && !cfg_.baseline ? &cache_ : nullptr; }
  const EngineConfig& config() const { return cfg_; }

  // Reads inputs, runs the node's code in `account`, and persists the output.
  // Compute errors surface as NodeFailed.
  NodeResult run_node(const rm::NodeSpec& node, const std::vector<sipc::StoredOutput>& inputs,
                      mem::AccountId account);

  // Drives the DAGs to completion or WorkloadStuck.
  MetricsReport run(std::vector<rm::DagSpec> dags, const Observer& observer = {});

 private:
  EngineConfig cfg_;
  mem::Store store_;
  dc::DeCache cache_;
  std::map<std::string, uint64_t> raw_bytes_;  // per source path
};

// Convenience wrapper creating a fresh engine.
MetricsReport run_to_completion(std::vector<rm::DagSpec> dags, const EngineConfig& cfg,
                                const Observer& observer = {});

}  // namespace zsim::engine
