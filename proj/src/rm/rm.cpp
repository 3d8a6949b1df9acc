#include "zsim/rm/rm.hpp"

#include <algorithm>
#include <tuple>

#include <fmt/format.h>

#include "zsim/util/error.hpp"

namespace zsim::rm {

std::string_view to_string(Policy p) {
  switch (p) {
    case Policy::None: return "none";
    case Policy::Kswap: return "kswap";
    case Policy::Rollback: return "rollback";
    case Policy::LimitDrop: return "limitdrop";
    case Policy::Adaptive: return "adaptive";
  }
  return "?";
}

std::string_view to_string(Trigger t) { return t == Trigger::Active ? "active" : "deadlock"; }

std::string_view to_string(Status s) {
  switch (s) {
    case Status::Waiting: return "waiting";
    case Status::Ready: return "ready";
    case Status::Running: return "running";
    case Status::Done: return "done";
    case Status::RolledBack: return "rolled_back";
  }
  return "?";
}

std::string_view to_string(EvictMode m) { return m == EvictMode::Delete ? "delete" : "swap"; }

Policy parse_policy(std::string_view s) {
  for (auto p : {Policy::None, Policy::Kswap, Policy::Rollback, Policy::LimitDrop, Policy::Adaptive})
    if (to_string(p) == s) return p;
  fail(ErrorCode::UsageError, fmt::format("unknown policy '{}'", s));
}

Trigger parse_trigger(std::string_view s) {
  if (s == "deadlock") return Trigger::OnDeadlockOnly;
  if (s == "active") return Trigger::Active;
  fail(ErrorCode::UsageError, fmt::format("unknown trigger '{}'", s));
}

ResourceManager::ResourceManager(mem::Store& store, dc::DeCache* cache, RmConfig cfg)
    : store_(store), cache_(cache), cfg_(cfg) {
  if (cfg_.policy.overcommit_pct < 100) fail(ErrorCode::InvalidConfig, "overcommit_pct must be >= 100");
  if (cfg_.mem_limit == 0) fail(ErrorCode::InvalidConfig, "mem_limit must be positive");
}

uint32_t ResourceManager::submit(DagSpec spec) {
  finalize(spec);
  DagState d;
  d.topo = topo_order(spec);
  d.nodes.resize(spec.nodes.size());
  auto di = uint32_t(dags_.size());
  for (size_t i = 0; i < spec.nodes.size(); ++i) {
    auto& n = d.nodes[i];
    n.key = {di, uint32_t(i)};
    for (auto pid : spec.nodes[i].parents) {
      auto p = uint32_t(spec.index_of(pid));
      n.inputs.push_back(p);
      if (std::find(n.parents.begin(), n.parents.end(), p) == n.parents.end()) {
        n.parents.push_back(p);
        d.nodes[p].children.push_back(uint32_t(i));
      }
    }
  }
  d.spec = std::move(spec);
  dags_.push_back(std::move(d));
  refresh(di);
  return di;
}

bool ResourceManager::higher_priority(const NodeKey& a, const NodeKey& b) const {
  auto key = [&](const NodeKey& k) {
    auto& s = spec(k);
    return std::make_tuple(-int64_t(s.depth), k.dag, s.id);
  };
  return key(a) < key(b);
}

bool ResourceManager::cache_owned(mem::SegmentId seg) const { return cache_ && cache_->owns_segment(seg); }

bool ResourceManager::valid(const NodeState& n) const {
  if (!n.output) return false;
  if (n.cache_entry) {
    auto e = cache_->entry(*n.cache_entry);
    if (!e || e->state != dc::EntryState::Ready) return false;
  }
  for (auto s : n.output->segments())
    if (!store_.has_segment(s)) return false;
  return true;
}

bool ResourceManager::needed(const DagState& d, const NodeState& n) const {
  if (n.children.empty()) return !d.complete;
  for (auto c : n.children)
    if (d.nodes[c].status != Status::Done) return true;
  return false;
}

void ResourceManager::hold(NodeState& n) {
  n.live = true;
  auto segs = n.output->segments();
  for (auto s : segs) deps_[s].insert(n.key);
  if (!cache_) return;
  if (n.cache_entry) cache_->pin(*n.cache_entry, +1);
  for (auto& e : cache_->entries()) {
    if (e.state != dc::EntryState::Ready || (n.cache_entry && e.id == *n.cache_entry)) continue;
    auto es = e.output.segments();
    bool uses = std::any_of(es.begin(), es.end(),
                            [&](auto s) { return std::find(segs.begin(), segs.end(), s) != segs.end(); });
    if (uses) {
      cache_->pin(e.id, +1);
      n.cache_pins.push_back(e.id);
    }
  }
}

void ResourceManager::release(NodeState& n) {
  n.live = false;
  for (auto s : n.output->segments()) {
    auto it = deps_.find(s);
    if (it == deps_.end()) continue;
    it->second.erase(n.key);
    if (it->second.empty()) {
      deps_.erase(it);
      gc_segment(s);
    }
  }
  if (!cache_) return;
  for (auto e : n.cache_pins) cache_->pin(e, -1);
  n.cache_pins.clear();
  if (n.cache_entry) {
    auto e = cache_->entry(*n.cache_entry);
    if (e && e->state == dc::EntryState::Ready) cache_->pin(*n.cache_entry, -1);
  }
}

void ResourceManager::gc_segment(mem::SegmentId seg) {
  if (store_.has_segment(seg) && !cache_owned(seg)) store_.delete_segment(seg);
}

void ResourceManager::activate_loader(NodeState& n) {
  if (!cache_) {
    n.status = Status::Ready;
    return;
  }
  auto& code = std::get<LoaderCode>(spec(n.key).code);
  auto r = cache_->lookup_or_begin(dc::CacheKey{code.path, code.dict_columns});
  n.pending = false;
  switch (r.kind) {
    case dc::Lookup::Kind::Hit: {
      // The lookup already pinned the entry on this DAG's behalf.
      cache_->pin(r.entry, -1);
      auto e = cache_->entry(r.entry);
      n.output = e->output;
      n.cache_entry = r.entry;
      n.status = Status::Done;
      n.measured_latency = 0;
      n.output_bytes = 0;
      hold(n);
      ++counters_.cache_hits;
      break;
    }
    case dc::Lookup::Kind::Ticket:
      n.ticket = r.ticket;
      n.status = Status::Ready;
      break;
    case dc::Lookup::Kind::Pending:
      n.pending = true;
      break;
  }
}

void ResourceManager::refresh(uint32_t di) {
  auto& d = dags_[di];
  bool changed = true;
  while (changed) {
    changed = false;
    for (auto it = d.topo.rbegin(); it != d.topo.rend(); ++it) {
      auto& n = d.nodes[*it];
      if (n.status != Status::Done || !needed(d, n)) continue;
      if (!valid(n)) {
        if (n.live) release(n);
        n.output.reset();
        n.cache_entry.reset();
        n.status = Status::RolledBack;
        changed = true;
      } else if (!n.live) {
        hold(n);
      }
    }
    for (auto i : d.topo) {
      auto& n = d.nodes[i];
      if (n.status != Status::Waiting && n.status != Status::RolledBack && n.status != Status::Ready) continue;
      if (n.parents.empty()) {
        if (n.status != Status::Ready && !n.ticket) {
          activate_loader(n);
          if (n.status == Status::Done) changed = true;
        }
        continue;
      }
      bool ok = std::all_of(n.parents.begin(), n.parents.end(), [&](uint32_t p) {
        auto& pn = d.nodes[p];
        return pn.status == Status::Done && pn.live;
      });
      if (ok) n.status = Status::Ready;
      else if (n.status == Status::Ready) n.status = Status::Waiting;
    }
  }
}

void ResourceManager::refresh_all() {
  for (uint32_t i = 0; i < dags_.size(); ++i)
    if (!dags_[i].complete) refresh(i);
}

void ResourceManager::complete_dag(uint32_t di) {
  auto& d = dags_[di];
  d.complete = true;
  for (auto& n : d.nodes)
    if (n.live) release(n);
  for (auto s : store_.segments()) {
    if (!store_.has_segment(s) || cache_owned(s)) continue;
    if (d.accounts.count(store_.segment(s).owner)) {
      deps_.erase(s);
      store_.delete_segment(s);
    }
  }
  for (auto a : d.accounts)
    if (store_.has_account(a)) store_.remove_account(a);
  d.accounts.clear();
}

std::vector<sipc::StoredOutput> ResourceManager::inputs_of(const NodeKey& key) const {
  auto& d = dags_.at(key.dag);
  std::vector<sipc::StoredOutput> out;
  for (auto i : d.nodes.at(key.index).inputs) {
    auto& p = d.nodes[i];
    if (!p.output) fail(ErrorCode::Internal, fmt::format("input of node {} has no output", spec(key).id));
    out.push_back(*p.output);
  }
  return out;
}

uint64_t ResourceManager::admission_need(const NodeKey& key) const {
  auto& d = dags_.at(key.dag);
  std::set<mem::SegmentId> segs;
  for (auto p : d.nodes.at(key.index).parents)
    if (auto& o = d.nodes[p].output)
      for (auto s : o->segments()) segs.insert(s);
  uint64_t resident = 0;
  for (auto s : segs)
    if (store_.has_segment(s)) resident += store_.resident_bytes(s);
  uint64_t est = spec(key).mem_estimate;
  return est > resident ? est - resident : 0;
}

uint64_t ResourceManager::committed() const {
  uint64_t c = store_.resident_bytes();
  for (auto& k : running_) {
    auto& n = node(k);
    if (n.need > n.produced) c += n.need - n.produced;
  }
  return c;
}

uint64_t ResourceManager::capacity() const { return cfg_.mem_limit * cfg_.policy.overcommit_pct / 100; }

void ResourceManager::note_produced(const NodeKey& key, uint64_t bytes) { mut(key).produced = bytes; }

void ResourceManager::start(NodeState& n, std::vector<Action>& out, bool overcommit) {
  auto& d = dags_[n.key.dag];
  n.need = admission_need(n.key);
  n.produced = 0;
  n.status = Status::Running;
  n.account = store_.create_account(fmt::format("{}/{}#{}", d.spec.name, spec(n.key).id, n.runs));
  if (!n.ticket) d.accounts.insert(n.account);
  if (n.runs++ > 0) ++counters_.nodes_rerun;
  if (n.parents.empty()) ++counters_.loads_executed;
  running_.insert(n.key);
  if (overcommit) ++counters_.overcommits;
  out.push_back(Action{overcommit ? Action::Kind::Overcommit : Action::Kind::Start, n.key});
}

std::vector<Action> ResourceManager::tick(uint32_t free_slots) {
  std::vector<Action> out;
  const auto& pol = cfg_.policy;
  while (free_slots > 0 && !stuck_) {
    std::vector<NodeKey> ready;
    for (auto& d : dags_)
      for (auto& n : d.nodes)
        if (n.status == Status::Ready) ready.push_back(n.key);
    if (ready.empty()) break;
    auto top = *std::min_element(ready.begin(), ready.end(),
                                 [&](auto& a, auto& b) { return higher_priority(a, b); });
    uint64_t need = admission_need(top);
    uint64_t used = committed();
    if (used + need <= capacity()) {
      start(mut(top), out, false);
      --free_slots;
      continue;
    }
    bool deadlock = running_.empty();
    if (pol.policy == Policy::None) {
      if (deadlock) stuck_ = true;
      break;
    }
    if (pol.trigger != Trigger::Active && !deadlock) break;
    if (pol.policy == Policy::Kswap) {
      if (deadlock) ++counters_.deadlocks_resolved;
      start(mut(top), out, true);
      --free_slots;
      continue;
    }
    uint64_t deficit = used + need - capacity();
    uint64_t freed = 0;
    try {
      auto acts = free_memory(deficit, &top);
      for (auto& a : acts) freed += a.bytes;
      out.insert(out.end(), acts.begin(), acts.end());
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InsufficientEvictables) throw;
    }
    if (freed >= deficit) {
      if (deadlock) ++counters_.deadlocks_resolved;
      continue;
    }
    if (!deadlock) {
      // Partial relief; a running node may still free more.
      if (freed > 0) continue;
      break;
    }
    // Evictions could not cover the node: run it anyway rather than hang.
    ++counters_.deadlocks_resolved;
    start(mut(top), out, true);
    --free_slots;
  }
  return out;
}

std::vector<mem::SegmentId> ResourceManager::exclusive_segments(const NodeState& n) const {
  std::vector<mem::SegmentId> out;
  if (!n.output) return out;
  for (auto s : n.output->segments()) {
    auto it = deps_.find(s);
    if (it == deps_.end() || it->second.size() != 1 || !it->second.count(n.key)) continue;
    if (!store_.has_segment(s) || cache_owned(s)) continue;
    out.push_back(s);
  }
  return out;
}

uint64_t ResourceManager::exclusive_resident(const NodeState& n) const {
  uint64_t b = 0;
  for (auto s : exclusive_segments(n)) b += store_.resident_bytes(s);
  return b;
}

std::set<mem::SegmentId> ResourceManager::running_reads() const {
  std::set<mem::SegmentId> r;
  for (auto& k : running_) {
    auto& d = dags_[k.dag];
    for (auto p : d.nodes[k.index].parents)
      if (auto& o = d.nodes[p].output)
        for (auto s : o->segments()) r.insert(s);
  }
  return r;
}

EvictMode ResourceManager::adaptive_decide(const NodeState& v) const {
  if (v.measured_latency < 0) return EvictMode::Swap;
  double roundtrip = double(v.output_bytes) * (1.0 / cfg_.swap_write_bw + 1.0 / cfg_.swap_read_bw);
  return v.measured_latency < cfg_.policy.adaptive_theta_scale * roundtrip ? EvictMode::Delete : EvictMode::Swap;
}

std::vector<Action> ResourceManager::free_memory(uint64_t bytes_needed, const NodeKey* requester) {
  std::vector<Action> out;
  uint64_t freed = 0;
  if (cache_) {
    uint64_t before = store_.resident_bytes();
    std::vector<dc::EntryInfo> evicted;
    cache_->evict_idle(bytes_needed, &evicted);
    uint64_t got = before - std::min(before, store_.resident_bytes());
    if (!evicted.empty()) {
      counters_.uncached_entries += evicted.size();
      out.push_back(Action{Action::Kind::Uncache, {}, EvictMode::Delete, got});
      freed += got;
      refresh_all();
    }
  }

  std::vector<NodeKey> victims;
  if (freed < bytes_needed) {
    auto reads = running_reads();
    std::set<NodeKey> parents;
    if (requester)
      for (auto p : node(*requester).parents) parents.insert(NodeKey{requester->dag, p});
    for (auto& d : dags_) {
      if (d.complete) continue;
      for (auto& n : d.nodes) {
        if (n.status != Status::Done || !n.live || n.cache_entry || parents.count(n.key)) continue;
        if (requester && cfg_.policy.trigger == Trigger::Active && !higher_priority(*requester, n.key)) continue;
        auto excl = exclusive_segments(n);
        if (std::any_of(excl.begin(), excl.end(), [&](auto s) { return reads.count(s) > 0; })) continue;
        if (exclusive_resident(n) == 0) continue;
        victims.push_back(n.key);
      }
    }
    std::sort(victims.begin(), victims.end(), [&](auto& a, auto& b) { return higher_priority(b, a); });
  }

  for (auto& v : victims) {
    if (freed >= bytes_needed) break;
    auto& n = node(v);
    if (n.status != Status::Done || exclusive_resident(n) == 0) continue;  // affected by an earlier eviction
    EvictMode mode = cfg_.policy.policy == Policy::Rollback    ? EvictMode::Delete
                     : cfg_.policy.policy == Policy::LimitDrop ? EvictMode::Swap
                                                               : adaptive_decide(n);
    Action a{Action::Kind::Evict, v, mode};
    if (mode == EvictMode::Delete) {
      a.bytes = rollback(v);
    } else {
      double t0 = store_.stats().modeled_swap_seconds;
      a.bytes = limit_drop(v);
      a.swap_seconds = store_.stats().modeled_swap_seconds - t0;
    }
    freed += a.bytes;
    out.push_back(a);
  }
  if (out.empty()) fail(ErrorCode::InsufficientEvictables, fmt::format("cannot free {} bytes", bytes_needed));
  return out;
}

uint64_t ResourceManager::rollback(const NodeKey& key) {
  auto& n = mut(key);
  if (n.status != Status::Done) fail(ErrorCode::InvalidArgument, "rollback of a node that is not done");
  uint64_t before = store_.resident_bytes();
  for (auto s : exclusive_segments(n)) {
    deps_.erase(s);
    store_.delete_segment(s);
  }
  uint64_t freed = before - std::min(before, store_.resident_bytes());
  if (n.live) release(n);
  n.output.reset();
  n.cache_entry.reset();
  n.status = Status::RolledBack;
  ++counters_.rollbacks;
  refresh(key.dag);
  return freed;
}

uint64_t ResourceManager::limit_drop(const NodeKey& key) {
  auto& n = node(key);
  if (n.status != Status::Done) fail(ErrorCode::InvalidArgument, "limit drop of a node that is not done");
  std::set<mem::AccountId> owners;
  for (auto s : exclusive_segments(n)) owners.insert(store_.segment(s).owner);
  uint64_t before = store_.stats().bytes_swapped_out;
  for (auto a : owners) {
    if (!store_.has_account(a)) continue;
    auto prev = store_.account(a).limit;
    store_.set_limit(a, 0);
    store_.set_limit(a, prev);
  }
  ++counters_.limit_drops;
  return store_.stats().bytes_swapped_out - before;
}

void ResourceManager::on_node_complete(const NodeKey& key, const sipc::StoredOutput& output, double latency,
                                       mem::AccountId account) {
  auto& n = mut(key);
  if (n.status != Status::Running) fail(ErrorCode::Internal, "completion of a node that is not running");
  running_.erase(key);
  ++counters_.nodes_executed;
  n.status = Status::Done;
  n.output = output;
  n.measured_latency = latency;
  n.output_bytes = output.report.new_segment_bytes + output.sink.length;
  n.account = account;
  if (n.ticket) {
    auto e = cache_->finish(*n.ticket, output, account);
    n.ticket.reset();
    n.cache_entry = e.id;
  }
  hold(n);
  auto& d = dags_[key.dag];
  for (auto p : n.parents) {
    auto& pn = d.nodes[p];
    if (pn.live && !needed(d, pn)) release(pn);
  }
  refresh(key.dag);
  if (std::all_of(d.nodes.begin(), d.nodes.end(), [](auto& x) { return x.status == Status::Done; }))
    complete_dag(key.dag);
  refresh_all();
}

bool ResourceManager::all_done() const {
  return std::all_of(dags_.begin(), dags_.end(), [](auto& d) { return d.complete; });
}

}  // namespace zsim::rm
