#include <functional>
#include <numeric>

#include "doctest.h"
#include "zsim/columnar/build.hpp"
#include "zsim/rm/rm.hpp"
#include "zsim/util/error.hpp"

using namespace zsim;
using namespace zsim::col;
using namespace zsim::rm;

namespace {

constexpr uint64_t kMiB = 1ull << 20;

mem::StoreConfig store_cfg() {
  mem::StoreConfig c;
  c.mem_limit = 256ull << 20;
  return c;
}

NodeSpec loader(uint32_t id, std::string path, uint64_t est = kMiB) {
  return NodeSpec{id, LoaderCode{std::move(path), {}, 1}, {}, est};
}

NodeSpec compute(uint32_t id, std::vector<uint32_t> parents, uint64_t est = kMiB) {
  return NodeSpec{id, ComputeOp{OpProject{{"c0"}}}, std::move(parents), est};
}

// Executes started nodes by hand: loaders write `bytes` of fresh data,
// compute nodes project their first input (pure resharing).
struct Harness {
  mem::Store store{store_cfg()};
  std::unique_ptr<dc::DeCache> cache;
  std::unique_ptr<ResourceManager> rm;

  explicit Harness(Policy p, bool with_cache = false, uint64_t limit = 64 * kMiB) {
    if (with_cache) cache = std::make_unique<dc::DeCache>(&store);
    RmConfig cfg;
    cfg.policy.policy = p;
    cfg.mem_limit = limit;
    rm = std::make_unique<ResourceManager>(store, cache.get(), cfg);
  }

  void exec(const NodeKey& k, uint64_t bytes = kMiB, double latency = 0.01) {
    auto acc = rm->node(k).account;
    MemoryContext ctx{&store, acc};
    sipc::WriteResult w;
    {
      // Inputs are unmapped before completion, as in the engine.
      Table out;
      sipc::ShareMap share;
      if (rm->spec(k).is_loader()) {
        std::vector<int64_t> v(bytes / 8);
        std::iota(v.begin(), v.end(), int64_t(k.index));
        out = make_table({{"c0", make_int64(ctx, v)}});
      } else {
        auto in = sipc::read_sink(store, rm->inputs_of(k).at(0).sink, acc);
        share = in.sharemap;
        out = project(in.table, {"c0"});
      }
      w = sipc::write(out, store, &share, acc);
    }
    auto sink = sipc::persist(store, acc, w.file);
    rm->on_node_complete(k, sipc::StoredOutput{sink, w.report}, latency, acc);
  }

  // Ticks and executes everything until no progress is possible.
  void drain(uint64_t bytes = kMiB) {
    for (int guard = 0; guard < 1000 && !rm->all_done() && !rm->stuck(); ++guard) {
      auto acts = rm->tick(1);
      bool started = false;
      for (auto& a : acts)
        if (a.kind == Action::Kind::Start || a.kind == Action::Kind::Overcommit) {
          exec(a.node, bytes);
          started = true;
        }
      if (!started && acts.empty()) break;
    }
  }
};

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Internal;
}

}  // namespace

TEST_CASE("dag validation and depths") {
  DagSpec d{"d", {loader(0, "/a"), compute(1, {0}), compute(2, {1, 0})}};
  finalize(d);
  CHECK(d.nodes[0].depth == 0);
  CHECK(d.nodes[1].depth == 1);
  CHECK(d.nodes[2].depth == 2);
  DagSpec cyc{"c", {compute(0, {1}), compute(1, {0})}};
  CHECK(code_of([&] { finalize(cyc); }) == ErrorCode::InvalidDag);
  DagSpec missing{"m", {compute(0, {7})}};
  CHECK(code_of([&] { finalize(missing); }) == ErrorCode::InvalidDag);
  DagSpec dup{"u", {loader(0, "/a"), loader(0, "/b")}};
  CHECK(code_of([&] { finalize(dup); }) == ErrorCode::InvalidDag);
}

TEST_CASE("priority is a strict total order, deepest first") {
  Harness h(Policy::Rollback);
  h.rm->submit({"a", {loader(0, "/a"), compute(1, {0}), compute(2, {1}), loader(3, "/b")}});
  h.rm->submit({"b", {loader(0, "/c"), compute(1, {0})}});
  std::vector<NodeKey> keys{{0, 0}, {0, 1}, {0, 2}, {0, 3}, {1, 0}, {1, 1}};
  for (auto& a : keys)
    for (auto& b : keys) {
      if (a == b) CHECK_FALSE(h.rm->higher_priority(a, b));
      else CHECK(h.rm->higher_priority(a, b) != h.rm->higher_priority(b, a));
    }
  CHECK(h.rm->higher_priority({0, 2}, {0, 1}));
  CHECK(h.rm->higher_priority({0, 1}, {1, 0}));  // deeper beats earlier dag
  CHECK(h.rm->higher_priority({0, 1}, {1, 1}));  // same depth: earlier dag
  CHECK(h.rm->higher_priority({0, 0}, {0, 3}));  // same dag and depth: lower id
}

TEST_CASE("adaptive decision compares latency with a swap round trip") {
  mem::Store store(store_cfg());
  RmConfig cfg;
  cfg.swap_write_bw = 1e9;
  cfg.swap_read_bw = 1e9;
  ResourceManager rm(store, nullptr, cfg);
  NodeState v;
  v.output_bytes = 100'000'000;  // round trip 0.2 s
  v.measured_latency = 2.0;
  CHECK(rm.adaptive_decide(v) == EvictMode::Swap);
  v.measured_latency = 0.05;
  CHECK(rm.adaptive_decide(v) == EvictMode::Delete);
  v.measured_latency = 0.2;
  CHECK(rm.adaptive_decide(v) == EvictMode::Swap);  // tie
  v.measured_latency = -1;
  CHECK(rm.adaptive_decide(v) == EvictMode::Swap);  // never measured
  v.measured_latency = 0;
  v.output_bytes = 0;
  CHECK(rm.adaptive_decide(v) == EvictMode::Swap);
}

TEST_CASE("policy names") {
  for (auto p : {Policy::None, Policy::Kswap, Policy::Rollback, Policy::LimitDrop, Policy::Adaptive})
    CHECK(parse_policy(to_string(p)) == p);
  for (auto t : {Trigger::OnDeadlockOnly, Trigger::Active}) CHECK(parse_trigger(to_string(t)) == t);
  CHECK(code_of([] { parse_policy("bogus"); }) == ErrorCode::UsageError);
}

TEST_CASE("a chain runs to completion and leaves nothing behind") {
  Harness h(Policy::Rollback);
  h.rm->submit({"chain", {loader(0, "/a"), compute(1, {0}), compute(2, {1})}});
  h.drain();
  CHECK(h.rm->all_done());
  CHECK(h.rm->counters().nodes_executed == 3);
  CHECK(h.store.segments().empty());
  CHECK(h.store.resident_bytes() == 0);
  CHECK(h.store.check_invariants().ok());
}

TEST_CASE("garbage collection keeps segments still referenced downstream") {
  Harness h(Policy::Rollback);
  h.rm->submit({"chain", {loader(0, "/a"), compute(1, {0}), compute(2, {1})}});
  auto acts = h.rm->tick(1);
  REQUIRE(acts.size() == 1);
  h.exec(acts[0].node);
  auto loader_segs = h.rm->node({0, 0}).output->report.segments();
  REQUIRE_FALSE(loader_segs.empty());
  acts = h.rm->tick(1);
  REQUIRE(acts.size() == 1);
  h.exec(acts[0].node);
  // The loader is released, but the projection still points at its data.
  CHECK_FALSE(h.rm->node({0, 0}).live);
  for (auto s : loader_segs) CHECK(h.store.has_segment(s));
  auto loader_sink = h.rm->node({0, 0}).output->sink.segment;
  CHECK_FALSE(h.store.has_segment(loader_sink));
}

TEST_CASE("victims are taken lowest priority first") {
  Harness h(Policy::Rollback);
  h.rm->submit({"join", {loader(0, "/a"), loader(1, "/b"), compute(2, {0, 1})}});
  for (int i = 0; i < 2; ++i) {
    auto acts = h.rm->tick(1);
    REQUIRE(acts.size() == 1);
    h.exec(acts[0].node);
  }
  REQUIRE(h.rm->node({0, 0}).status == Status::Done);
  REQUIRE(h.rm->node({0, 1}).status == Status::Done);
  auto acts = h.rm->free_memory(2 * kMiB, nullptr);
  REQUIRE(acts.size() == 2);
  CHECK(acts[0].kind == Action::Kind::Evict);
  CHECK(acts[0].node == NodeKey{0, 1});
  CHECK(acts[1].node == NodeKey{0, 0});
  CHECK(acts[0].mode == EvictMode::Delete);
  CHECK(acts[0].bytes >= kMiB);
  CHECK(h.rm->counters().rollbacks == 2);
  CHECK(h.rm->node({0, 1}).status != Status::Done);
  // Rolled-back loaders are simply rerun.
  h.drain();
  CHECK(h.rm->all_done());
  CHECK(h.rm->counters().nodes_rerun == 2);
}

TEST_CASE("only the needed victims are evicted") {
  Harness h(Policy::Rollback);
  h.rm->submit({"join", {loader(0, "/a"), loader(1, "/b"), compute(2, {0, 1})}});
  for (int i = 0; i < 2; ++i) h.exec(h.rm->tick(1).at(0).node);
  auto acts = h.rm->free_memory(1, nullptr);
  REQUIRE(acts.size() == 1);
  CHECK(acts[0].node == NodeKey{0, 1});
  CHECK(h.rm->node({0, 0}).status == Status::Done);
}

TEST_CASE("limit drop swaps instead of deleting") {
  Harness h(Policy::LimitDrop);
  h.rm->submit({"join", {loader(0, "/a"), loader(1, "/b"), compute(2, {0, 1})}});
  for (int i = 0; i < 2; ++i) h.exec(h.rm->tick(1).at(0).node);
  auto acts = h.rm->free_memory(1, nullptr);
  REQUIRE(acts.size() == 1);
  CHECK(acts[0].mode == EvictMode::Swap);
  CHECK(acts[0].bytes >= kMiB);
  CHECK(acts[0].swap_seconds > 0);
  CHECK(h.rm->node({0, 1}).status == Status::Done);
  CHECK(h.store.swapped_bytes() >= kMiB);
  h.drain();
  CHECK(h.rm->all_done());
  CHECK(h.rm->counters().nodes_rerun == 0);
}

TEST_CASE("nothing evictable") {
  Harness h(Policy::Rollback);
  h.rm->submit({"a", {loader(0, "/a")}});
  CHECK(code_of([&] { h.rm->free_memory(kMiB, nullptr); }) == ErrorCode::InsufficientEvictables);
}

TEST_CASE("admission need subtracts resident inputs") {
  Harness h(Policy::Rollback);
  h.rm->submit({"c", {loader(0, "/a", kMiB), compute(1, {0}, 3 * kMiB)}});
  CHECK(h.rm->admission_need({0, 0}) == kMiB);
  h.exec(h.rm->tick(1).at(0).node);
  uint64_t resident = h.store.resident_bytes();
  CHECK(h.rm->admission_need({0, 1}) == 3 * kMiB - resident);
}

TEST_CASE("no policy gets stuck on an oversized node") {
  Harness h(Policy::None, false, 8 * kMiB);
  h.rm->submit({"big", {loader(0, "/a", 16 * kMiB)}});
  auto acts = h.rm->tick(4);
  CHECK(acts.empty());
  CHECK(h.rm->stuck());
}

TEST_CASE("kswap overcommits an oversized node") {
  Harness h(Policy::Kswap, false, 8 * kMiB);
  h.rm->submit({"big", {loader(0, "/a", 16 * kMiB)}});
  auto acts = h.rm->tick(4);
  REQUIRE(acts.size() == 1);
  CHECK(acts[0].kind == Action::Kind::Overcommit);
  CHECK(h.rm->counters().deadlocks_resolved == 1);
}

TEST_CASE("cached loader output is reused by a later dag") {
  Harness h(Policy::Rollback, true);
  h.rm->submit({"first", {loader(0, "/a"), compute(1, {0})}});
  h.drain();
  REQUIRE(h.rm->all_done());
  CHECK(h.cache->ready_bytes() == kMiB);
  h.rm->submit({"second", {loader(0, "/a"), compute(1, {0})}});
  CHECK(h.rm->node({1, 0}).status == Status::Done);
  CHECK(h.rm->counters().cache_hits == 1);
  h.drain();
  CHECK(h.rm->all_done());
  CHECK(h.rm->counters().loads_executed == 1);
}

TEST_CASE("idle cache entries are dropped before any node is evicted") {
  Harness h(Policy::Rollback, true);
  h.rm->submit({"first", {loader(0, "/a")}});
  h.drain();
  REQUIRE(h.cache->ready_bytes() == kMiB);
  h.rm->submit({"second", {loader(0, "/b"), loader(1, "/c"), compute(2, {0, 1})}});
  for (int i = 0; i < 2; ++i) h.exec(h.rm->tick(1).at(0).node);
  auto acts = h.rm->free_memory(kMiB / 2, nullptr);
  REQUIRE(acts.size() == 1);
  CHECK(acts[0].kind == Action::Kind::Uncache);
  CHECK(acts[0].bytes >= kMiB);
  CHECK(h.rm->counters().uncached_entries == 1);
  CHECK(h.rm->node({1, 0}).status == Status::Done);
  CHECK(h.rm->node({1, 1}).status == Status::Done);
}
