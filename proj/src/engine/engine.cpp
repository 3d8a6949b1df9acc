#include "zsim/engine/engine.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <queue>

#include <fmt/format.h>

#include "zsim/pqlite/pqlite.hpp"
#include "zsim/util/error.hpp"

namespace zsim::engine {

namespace {

struct Timing {
  double compute_s = 0;
  uint64_t work_bytes = 0;
};

nlohmann::ordered_json counters_json(const mem::MemCounters& c) {
  nlohmann::ordered_json j;
  j["bytes_copied"] = c.bytes_copied;
  j["bytes_swapped_out"] = c.bytes_swapped_out;
  j["bytes_swapped_in"] = c.bytes_swapped_in;
  j["swap_in_events"] = c.swap_in_events;
  j["deanon_calls"] = c.deanon_calls;
  j["pages_transferred"] = c.pages_transferred;
  j["modeled_swap_seconds"] = c.modeled_swap_seconds;
  return j;
}

class Trace {
 public:
  explicit Trace(const std::string& path) {
    if (path.empty()) return;
    out_.open(path);
    if (!out_) fail(ErrorCode::IoError, fmt::format("cannot open trace file '{}'", path));
  }
  void emit(std::string_view event, double t, const std::string& dag, int64_t node, std::string_view action,
            uint64_t bytes = 0) {
    if (!out_.is_open()) return;
    nlohmann::ordered_json j;
    j["event"] = event;
    j["timestamp"] = t;
    j["dag"] = dag;
    j["node"] = node;
    j["action"] = action;
    j["bytes"] = bytes;
    out_ << j.dump() << '\n';
  }

 private:
  std::ofstream out_;
};

}  // namespace

nlohmann::ordered_json MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["counters"] = counters_json(counters);
  j["loads_executed"] = loads_executed;
  j["nodes_executed"] = nodes_executed;
  j["nodes_rerun"] = nodes_rerun;
  j["cache_hits"] = cache_hits;
  j["deadlocks_resolved"] = deadlocks_resolved;
  j["overcommits"] = overcommits;
  j["rollbacks"] = rollbacks;
  j["limit_drops"] = limit_drops;
  j["uncached_entries"] = uncached_entries;
  j["new_output_bytes"] = new_output_bytes;
  j["makespan_wall_s"] = makespan_wall_s;
  j["makespan_modeled_s"] = makespan_modeled_s;
  j["stuck"] = stuck;
  j["live_segments_after"] = live_segments_after;
  return j;
}

Engine::Engine(EngineConfig cfg) : cfg_(std::move(cfg)), store_(cfg_.store), cache_(&store_) {
  if (cfg_.workers == 0) fail(ErrorCode::InvalidConfig, "workers must be positive");
  if (cfg_.compute_units < 0) fail(ErrorCode::InvalidConfig, "compute_units must be non-negative");
}

NodeResult Engine::run_node(const rm::NodeSpec& node, const std::vector<sipc::StoredOutput>& inputs,
                            mem::AccountId account) {
  const auto s0 = store_.stats();
  const auto& cost = cfg_.cost;
  Timing tm;
  sipc::StoredOutput out;
  {
    sipc::ShareMap sm;
    std::vector<col::Table> tables;
    uint64_t input_bytes = 0;
    for (auto& in : inputs) {
      auto rr = sipc::read_sink(store_, in.sink, account);
      sm.merge(rr.sharemap);
      tables.push_back(std::move(rr.table));
      input_bytes += in.report.referenced_bytes() + in.report.inline_bytes;
    }
    col::MemoryContext ctx{&store_, account};
    col::Table result;
    const uint64_t anon0 = store_.account(account).anon_allocated;
    try {
      if (auto* ld = std::get_if<rm::LoaderCode>(&node.code)) {
        unsigned threads = ld->threads ? ld->threads : cfg_.load_threads;
        auto bytes = pql::read_file(ld->path);
        auto info = pql::inspect_source(bytes);
        result = pql::decode_source(bytes, pql::LoadOptions{ld->dict_columns, threads}, ctx);
        double lanes = double(std::max<size_t>(1, std::min<size_t>(threads, info.schema.fields.size())));
        tm.work_bytes = info.raw_bytes();
        tm.compute_s = double(info.raw_bytes()) / (cost.decode_bw * lanes);
      } else {
        auto& op = std::get<rm::ComputeOp>(node.code);
        result = rm::apply(op, tables, ctx);
        tm.work_bytes = store_.account(account).anon_allocated - anon0;
        if (std::holds_alternative<rm::OpKernel>(op)) tm.work_bytes += input_bytes;
        tm.compute_s = cfg_.compute_units * double(tm.work_bytes) / cost.compute_bw;
      }
    } catch (const Error& e) {
      fail(ErrorCode::NodeFailed, fmt::format("node {} ({}): {}: {}", node.id, rm::describe(node.code),
                                              to_string(e.code()), e.what()));
    }
    sipc::WriteOptions wo{cfg_.baseline, cfg_.inline_threshold};
    auto w = sipc::write(result, store_, cfg_.baseline ? nullptr : &sm, account, wo);
    tables.clear();
    result = {};
    out.sink = sipc::persist(store_, account, w.file);
    out.report = std::move(w.report);
  }
  const auto d = store_.stats() - s0;
  NodeResult r;
  r.output = std::move(out);
  r.work_bytes = tm.work_bytes;
  r.latency_s = cost.node_overhead_s + tm.compute_s + double(d.bytes_copied) / cost.copy_bw +
                double(d.pages_transferred) * cost.deanon_page_s;
  r.swap_s = d.modeled_swap_seconds;
  return r;
}

MetricsReport Engine::run(std::vector<rm::DagSpec> dags, const Observer& observer) {
  const auto wall0 = std::chrono::steady_clock::now();
  const auto stats0 = store_.stats();
  rm::RmConfig rc{cfg_.policy, cfg_.store.mem_limit, cfg_.store.swap_write_bw, cfg_.store.swap_read_bw};
  rm::ResourceManager rm(store_, cache(), rc);
  Trace trace(cfg_.trace_path);
  for (auto& d : dags) {
    auto name = d.name;
    rm.submit(std::move(d));
    trace.emit("submit", 0, name, -1, "submit");
  }

  struct Event {
    double t;
    uint64_t seq;
    rm::NodeKey key;
    NodeResult result;
    mem::AccountId account;
  };
  auto later = [](const Event& a, const Event& b) { return std::tie(a.t, a.seq) > std::tie(b.t, b.seq); };
  std::priority_queue<Event, std::vector<Event>, decltype(later)> events(later);

  MetricsReport rep;
  double clock = 0;  // compute only; swap time is added at the end
  uint64_t seq = 0, idle_rounds = 0;
  for (;;) {
    auto acts = rm.tick(cfg_.workers - uint32_t(rm.running().size()));
    const double start_at = clock;
    for (auto& a : acts) {
      const auto& dn = a.kind == rm::Action::Kind::Uncache ? std::string() : rm.dag(a.node.dag).name;
      switch (a.kind) {
        case rm::Action::Kind::Uncache:
          trace.emit("evict", clock, "", -1, "uncache", a.bytes);
          break;
        case rm::Action::Kind::Evict:
          trace.emit("evict", clock, dn, rm.spec(a.node).id, rm::to_string(a.mode), a.bytes);
          break;
        case rm::Action::Kind::Start:
        case rm::Action::Kind::Overcommit: {
          const auto& spec = rm.spec(a.node);
          auto acc = rm.node(a.node).account;
          auto r = run_node(spec, rm.inputs_of(a.node), acc);
          rm.note_produced(a.node, store_.account(acc).mem_charged);
          double lat = r.latency_s;
          uint64_t nb = r.output.report.new_segment_bytes + r.output.sink.length;
          rep.new_output_bytes += nb;
          rep.nodes.push_back(NodeRecord{dn, spec.id, rm.node(a.node).runs, start_at, lat, nb});
          trace.emit("start", start_at, dn, spec.id,
                     a.kind == rm::Action::Kind::Start ? "start" : "overcommit", nb);
          if (observer) {
            auto rr = sipc::read_sink(store_, r.output.sink, acc);
            observer(dn, spec, rr.table);
          }
          events.push(Event{start_at + lat, seq++, a.node, std::move(r), acc});
          break;
        }
      }
    }
    if (rm.stuck()) {
      rep.stuck = true;
      trace.emit("stuck", clock, "", -1, "stuck");
      break;
    }
    if (events.empty()) {
      if (rm.all_done()) break;
      // Evictions alone may unblock the next tick; give up if nothing moves.
      if (acts.empty() || ++idle_rounds > 1000) {
        rep.stuck = true;
        trace.emit("stuck", clock, "", -1, "stuck");
        break;
      }
      continue;
    }
    idle_rounds = 0;
    auto ev = events.top();
    events.pop();
    clock = std::max(clock, ev.t);
    trace.emit("complete", clock, rm.dag(ev.key.dag).name, rm.spec(ev.key).id, "complete");
    rm.on_node_complete(ev.key, ev.result.output, ev.result.latency_s, ev.account);
  }

  auto& c = rm.counters();
  rep.counters = store_.stats() - stats0;
  rep.loads_executed = c.loads_executed;
  rep.nodes_executed = c.nodes_executed;
  rep.nodes_rerun = c.nodes_rerun;
  rep.cache_hits = c.cache_hits;
  rep.deadlocks_resolved = c.deadlocks_resolved;
  rep.overcommits = c.overcommits;
  rep.rollbacks = c.rollbacks;
  rep.limit_drops = c.limit_drops;
  rep.uncached_entries = c.uncached_entries;
  rep.makespan_modeled_s = clock + rep.counters.modeled_swap_seconds;
  rep.live_segments_after = store_.segments().size();
  rep.makespan_wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  return rep;
}

MetricsReport run_to_completion(std::vector<rm::DagSpec> dags, const EngineConfig& cfg, const Observer& observer) {
  Engine e(cfg);
  return e.run(std::move(dags), observer);
}

}  // namespace zsim::engine
