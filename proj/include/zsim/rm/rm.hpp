#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "zsim/decache/decache.hpp"
#include "zsim/rm/dag.hpp"
#include "zsim/sipc/sipc.hpp"

namespace zsim::rm {

enum class Policy { None, Kswap, Rollback, LimitDrop, Adaptive };
enum class Trigger { OnDeadlockOnly, Active };

struct PolicyConfig {
  Policy policy = Policy::Adaptive;
  Trigger trigger = Trigger::OnDeadlockOnly;
  uint32_t overcommit_pct = 100;
  double adaptive_theta_scale = 1.0;
};

enum class Status { Waiting, Ready, Running, Done, RolledBack };
enum class EvictMode { Delete, Swap };

std::string_view to_string(Policy p);
std::string_view to_string(Trigger t);
std::string_view to_string(Status s);
std::string_view to_string(EvictMode m);
// Throw UsageError on unknown names.
Policy parse_policy(std::string_view s);
Trigger parse_trigger(std::string_view s);

struct NodeKey {
  uint32_t dag = 0;
  uint32_t index = 0;  // position in DagSpec::nodes
  auto operator<=>(const NodeKey&) const = default;
};

struct NodeState {
  NodeKey key;
  Status status = Status::Waiting;
  std::optional<sipc::StoredOutput> output;
  bool live = false;  // output held for unrun children or DAG completion
  double measured_latency = -1;
  uint64_t output_bytes = 0;  // new bytes written by the last run
  mem::AccountId account = 0;
  uint32_t runs = 0;
  std::optional<uint64_t> cache_entry;  // loader output held through the DeCache
  std::optional<dc::Ticket> ticket;
  bool pending = false;  // waiting on another loader of the same key
  uint64_t need = 0;
  uint64_t produced = 0;
  std::vector<uint64_t> cache_pins;  // entries pinned because this output references them
  std::vector<uint32_t> parents;     // distinct, as node indices
  std::vector<uint32_t> inputs;      // input order, as node indices
  std::vector<uint32_t> children;
};

struct Action {
  enum class Kind { Start, Overcommit, Uncache, Evict } kind = Kind::Start;
  NodeKey node;
  EvictMode mode = EvictMode::Delete;
  uint64_t bytes = 0;
  double swap_seconds = 0;  // modeled device time spent by the action
};

struct RmConfig {
  PolicyConfig policy;
  uint64_t mem_limit = 50ull << 20;
  double swap_write_bw = 2e9;
  double swap_read_bw = 2e9;
};

struct RmCounters {
  uint64_t loads_executed = 0;
  uint64_t nodes_executed = 0;
  uint64_t nodes_rerun = 0;
  uint64_t cache_hits = 0;
  uint64_t deadlocks_resolved = 0;
  uint64_t overcommits = 0;
  uint64_t rollbacks = 0;
  uint64_t limit_drops = 0;
  uint64_t uncached_entries = 0;
};

class ResourceManager {
 public:
  // `cache` may be null (no DeCache).
  ResourceManager(mem::Store& store, dc::DeCache* cache, RmConfig cfg);

  // Throws InvalidDag. Returns the DAG index.
  uint32_t submit(DagSpec dag);
  // Admission and, when blocked, eviction. Evictions are carried out before
  // returning; Start/Overcommit actions are for the caller to execute.
  std::vector<Action> tick(uint32_t free_slots);
  // Uncache first, then evict lowest-priority victims. Throws
  // InsufficientEvictables when nothing can be freed.
  std::vector<Action> free_memory(uint64_t bytes_needed, const NodeKey* requester);
  EvictMode adaptive_decide(const NodeState& victim) const;
  void on_node_complete(const NodeKey& key, const sipc::StoredOutput& output, double latency,
                        mem::AccountId account);
  void note_produced(const NodeKey& key, uint64_t bytes);
  // Deletes the victim's exclusive segments. Returns resident bytes freed.
  uint64_t rollback(const NodeKey& key);
  // Swaps the victim's exclusive data via its owners' limits. Returns bytes swapped.
  uint64_t limit_drop(const NodeKey& key);

  // True when a strictly higher-priority key.
  bool higher_priority(const NodeKey& a, const NodeKey& b) const;
  uint64_t admission_need(const NodeKey& key) const;
  uint64_t committed() const;
  uint64_t capacity() const;

  bool all_done() const;
  bool stuck() const { return stuck_; }
  const DagSpec& dag(uint32_t i) const { return dags_.at(i).spec; }
  size_t dag_count() const { return dags_.size(); }
  const NodeState& node(const NodeKey& k) const { return dags_.at(k.dag).nodes.at(k.index); }
  const NodeSpec& spec(const NodeKey& k) const { return dags_.at(k.dag).spec.nodes.at(k.index); }
  std::vector<NodeKey> running() const { return {running_.begin(), running_.end()}; }
  // Outputs feeding a node, in input order.
  std::vector<sipc::StoredOutput> inputs_of(const NodeKey& key) const;
  // Accounts created for a DAG's sandboxes that are still alive.
  const RmCounters& counters() const { return counters_; }
  const RmConfig& config() const { return cfg_; }

 private:
  struct DagState {
    DagSpec spec;
    std::vector<NodeState> nodes;
    std::vector<size_t> topo;
    std::set<mem::AccountId> accounts;
    bool complete = false;
  };

  NodeState& mut(const NodeKey& k) { return dags_.at(k.dag).nodes.at(k.index); }
  bool valid(const NodeState& n) const;
  bool needed(const DagState& d, const NodeState& n) const;
  void hold(NodeState& n);
  void release(NodeState& n);
  void gc_segment(mem::SegmentId seg);
  bool cache_owned(mem::SegmentId seg) const;
  void refresh(uint32_t dag);
  void refresh_all();
  void activate_loader(NodeState& n);
  void complete_dag(uint32_t dag);
  std::vector<mem::SegmentId> exclusive_segments(const NodeState& n) const;
  uint64_t exclusive_resident(const NodeState& n) const;
  std::set<mem::SegmentId> running_reads() const;
  void start(NodeState& n, std::vector<Action>& out, bool overcommit);

  mem::Store& store_;
  dc::DeCache* cache_;
  RmConfig cfg_;
  std::vector<DagState> dags_;
  std::set<NodeKey> running_;
  std::map<mem::SegmentId, std::set<NodeKey>> deps_;
  RmCounters counters_;
  bool stuck_ = false;
};

}  // namespace zsim::rm
