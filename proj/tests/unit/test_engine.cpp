#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>

#include "doctest.h"
#include "zsim/columnar/build.hpp"
#include "zsim/engine/engine.hpp"
#include "zsim/pqlite/pqlite.hpp"
#include "zsim/reference/reference.hpp"
#include "zsim/util/error.hpp"

using namespace zsim;
using namespace zsim::col;
using namespace zsim::rm;

namespace {

mem::StoreConfig big_store() {
  mem::StoreConfig c;
  c.mem_limit = 256ull << 20;
  return c;
}

constexpr uint64_t kMiB = 1ull << 20;
namespace fs = std::filesystem;

// A two-column source (Int64 + Utf8) of `rows` rows, written once per path.
std::string make_source(const std::string& name, uint64_t rows) {
  auto dir = fs::temp_directory_path() / "zsim-engine-test";
  fs::create_directories(dir);
  auto path = (dir / name).string();
  mem::Store s(big_store());
  MemoryContext ctx{&s, s.create_account()};
  std::vector<int64_t> a(rows);
  std::iota(a.begin(), a.end(), 0);
  std::vector<std::string> b(rows);
  for (uint64_t i = 0; i < rows; ++i) b[i] = "row" + std::to_string(i % 97);
  auto t = make_table({{"a", make_int64(ctx, a)}, {"b", make_utf8(ctx, b)}});
  pql::write_source(t, path, {pql::Encoding::ZigzagDeltaVarint, pql::Encoding::Plain});
  return path;
}

ref::RowTable source_rows(const std::string& path) {
  mem::Store s(big_store());
  MemoryContext ctx{&s, s.create_account()};
  return ref::from_table(pql::load_source(path, {{}, 1}, ctx));
}

engine::EngineConfig roomy() {
  engine::EngineConfig c;
  c.store.mem_limit = 256 * kMiB;
  return c;
}

NodeSpec loader(uint32_t id, const std::string& path, uint64_t est = kMiB) {
  return NodeSpec{id, LoaderCode{path, {}, 0}, {}, est};
}

NodeSpec op(uint32_t id, ComputeOp code, std::vector<uint32_t> parents, uint64_t est = kMiB) {
  return NodeSpec{id, std::move(code), std::move(parents), est};
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Internal;
}

}  // namespace

TEST_CASE("loader and projection through run_node") {
  auto path = make_source("a.pql", 200000);
  engine::Engine e(roomy());
  auto acc = e.store().create_account("l");
  auto l = e.run_node(loader(0, path), {}, acc);
  CHECK(l.latency_s > 0);
  CHECK(l.output.report.new_segment_bytes > 0);
  auto back = sipc::read_sink(e.store(), l.output.sink, acc);
  CHECK(ref::equal(source_rows(path), back.table, 0));

  auto acc2 = e.store().create_account("p");
  auto p = e.run_node(op(1, OpProject{{"b"}}, {0}), {l.output}, acc2);
  CHECK(p.output.report.new_segments.empty());
  CHECK(p.output.report.new_segment_bytes == 0);
  CHECK(p.swap_s == 0);
}

TEST_CASE("reading a swapped-out parent swaps it back in") {
  auto path = make_source("b.pql", 200000);
  engine::Engine e(roomy());
  auto acc = e.store().create_account("l");
  auto l = e.run_node(loader(0, path), {}, acc);
  e.store().set_limit(acc, 0);
  e.store().set_limit(acc, std::nullopt);
  REQUIRE(e.store().swapped_bytes() > 0);
  auto before = e.store().stats();
  auto acc2 = e.store().create_account("c");
  auto r = e.run_node(op(1, OpAddColumns{{col::Expr{"a2", "a", col::BinOp::Add, "a"}}}, {0}), {l.output}, acc2);
  auto d = e.store().stats() - before;
  CHECK(d.bytes_swapped_in > 0);
  CHECK(d.swap_in_events > 0);
  CHECK(r.swap_s > 0);
}

TEST_CASE("compute errors surface as NodeFailed") {
  auto path = make_source("c.pql", 1000);
  engine::Engine e(roomy());
  auto acc = e.store().create_account("l");
  auto l = e.run_node(loader(0, path), {}, acc);
  auto acc2 = e.store().create_account("s");
  CHECK(code_of([&] { e.run_node(op(1, OpSort{"missing", true}, {0}), {l.output}, acc2); }) == ErrorCode::NodeFailed);
}

TEST_CASE("same-input dags load once with the cache") {
  auto path = make_source("d.pql", 50000);
  auto dags = [&] {
    std::vector<DagSpec> out;
    for (int i = 0; i < 20; ++i)
      out.push_back({"d" + std::to_string(i), {loader(0, path), op(1, OpProject{{"a"}}, {0})}});
    return out;
  };
  auto with = engine::run_to_completion(dags(), roomy());
  CHECK(with.loads_executed == 1);
  CHECK(with.cache_hits == 19);
  CHECK_FALSE(with.stuck);
  auto cfg = roomy();
  cfg.use_decache = false;
  auto without = engine::run_to_completion(dags(), cfg);
  CHECK(without.loads_executed == 20);
  CHECK(with.makespan_modeled_s < without.makespan_modeled_s);
}

TEST_CASE("observer sees every node output") {
  auto path = make_source("e.pql", 5000);
  DagSpec d{"obs",
            {loader(0, path), op(1, OpFilter{7, 0.5}, {0}), op(2, OpSort{"b", false}, {1}),
             op(3, OpSlice{0.25, 0.5}, {2})}};
  auto src = source_rows(path);
  std::map<uint32_t, ref::RowTable> want;
  want[0] = src;
  want[1] = ref::filter(src, filter_mask(7, 0.5, src.rows.size()));
  want[2] = ref::sort(want[1], "b", false);
  uint64_t n = want[2].rows.size();
  uint64_t lo = uint64_t(double(n) * 0.25), hi = uint64_t(double(n) * 0.75);
  want[3] = ref::slice(want[2], lo, hi - lo);
  int seen = 0;
  auto rep = engine::run_to_completion({d}, roomy(), [&](const std::string&, const NodeSpec& s, const Table& t) {
    std::string why;
    CHECK_MESSAGE(ref::equal(want.at(s.id), t, 1e-9, &why), why);
    ++seen;
  });
  CHECK(seen == 4);
  CHECK(rep.nodes_executed == 4);
  CHECK(rep.nodes.size() == 4);
  CHECK(rep.live_segments_after > 0);  // the cached loader output

  engine::Engine e(roomy());
  e.run({d});
  for (auto seg : e.store().segments()) CHECK(e.cache()->owns_segment(seg));
  auto cfg = roomy();
  cfg.use_decache = false;
  CHECK(engine::run_to_completion({d}, cfg).live_segments_after == 0);
}

TEST_CASE("no policy reports a stuck workload") {
  auto path = make_source("f.pql", 1000);
  auto cfg = roomy();
  cfg.store.mem_limit = 8 * kMiB;
  cfg.policy.policy = Policy::None;
  auto rep = engine::run_to_completion({{"big", {loader(0, path, 64 * kMiB)}}}, cfg);
  CHECK(rep.stuck);
  CHECK(rep.nodes_executed == 0);
}

TEST_CASE("compute units change modeled time only") {
  auto path = make_source("g.pql", 100000);
  auto dag = [&] { return std::vector<DagSpec>{{"cu", {loader(0, path), op(1, OpKernel{col::Upper{"b"}}, {0})}}}; };
  auto one = roomy();
  auto four = roomy();
  four.compute_units = 4;
  auto a = engine::run_to_completion(dag(), one);
  auto b = engine::run_to_completion(dag(), four);
  CHECK(a.counters == b.counters);
  CHECK(a.new_output_bytes == b.new_output_bytes);
  // Units are arithmetic repetitions per node: more units, more modeled time.
  CHECK(b.makespan_modeled_s > a.makespan_modeled_s);
}

TEST_CASE("trace and json report") {
  auto path = make_source("h.pql", 1000);
  auto cfg = roomy();
  cfg.trace_path = (fs::temp_directory_path() / "zsim-engine-test" / "trace.jsonl").string();
  fs::remove(cfg.trace_path);
  auto rep = engine::run_to_completion({{"t", {loader(0, path), op(1, OpProject{{"a"}}, {0})}}}, cfg);
  std::ifstream in(cfg.trace_path);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    CHECK_FALSE(nlohmann::json::parse(line).is_discarded());
    ++lines;
  }
  CHECK(lines >= 2);
  auto j = rep.to_json();
  CHECK(j["nodes_executed"].get<uint64_t>() == 2);
  CHECK(j.contains("makespan_modeled_s"));
}
