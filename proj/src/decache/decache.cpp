#include "zsim/decache/decache.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "zsim/util/error.hpp"

namespace zsim::dc {

std::string_view to_string(EntryState s) {
  switch (s) {
    case EntryState::Loading: return "Loading";
    case EntryState::Ready: return "Ready";
    case EntryState::Evicted: return "Evicted";
  }
  return "?";
}

Lookup DeCache::lookup_locked(const CacheKey& key) {
  Lookup r;
  if (auto it = live_.find(key); it != live_.end()) {
    auto& e = entries_.at(it->second);
    r.entry = e.id;
    if (e.state == EntryState::Loading) {
      r.kind = Lookup::Kind::Pending;
    } else {
      r.kind = Lookup::Kind::Hit;
      ++e.refcount;
      e.last_use = ++clock_;
    }
    return r;
  }
  EntryInfo e;
  e.id = next_id_++;
  e.key = key;
  e.state = EntryState::Loading;
  live_[key] = e.id;
  r.kind = Lookup::Kind::Ticket;
  r.ticket.entry = e.id;
  entries_.emplace(e.id, std::move(e));
  return r;
}

Lookup DeCache::lookup_or_begin(const CacheKey& key) {
  std::lock_guard lk(mu_);
  return lookup_locked(key);
}

Lookup DeCache::get_or_begin(const CacheKey& key) {
  std::unique_lock lk(mu_);
  for (;;) {
    auto r = lookup_locked(key);
    if (r.kind != Lookup::Kind::Pending) return r;
    uint64_t waiting = r.entry;
    cv_.wait(lk, [&] { return entries_.at(waiting).state != EntryState::Loading; });
  }
}

EntryInfo DeCache::finish(const Ticket& t, const sipc::StoredOutput& output, mem::AccountId owner) {
  std::lock_guard lk(mu_);
  auto it = entries_.find(t.entry);
  if (it == entries_.end() || it->second.state != EntryState::Loading)
    fail(ErrorCode::StaleTicket, fmt::format("ticket for entry {} is not live", t.entry));
  auto& e = it->second;
  e.state = EntryState::Ready;
  e.output = output;
  e.owner = owner;
  e.bytes = output.report.referenced_bytes();
  e.refcount = 0;
  e.last_use = ++clock_;
  cv_.notify_all();
  return e;
}

void DeCache::abandon(const Ticket& t) {
  std::lock_guard lk(mu_);
  auto it = entries_.find(t.entry);
  if (it == entries_.end() || it->second.state != EntryState::Loading)
    fail(ErrorCode::StaleTicket, fmt::format("ticket for entry {} is not live", t.entry));
  it->second.state = EntryState::Evicted;
  live_.erase(it->second.key);
  cv_.notify_all();
}

void DeCache::pin(uint64_t entry, int delta) {
  std::lock_guard lk(mu_);
  auto it = entries_.find(entry);
  if (it == entries_.end() || it->second.state != EntryState::Ready)
    fail(ErrorCode::RefcountError, fmt::format("entry {} is not Ready", entry));
  auto& e = it->second;
  if (e.refcount + delta < 0) fail(ErrorCode::RefcountError, fmt::format("entry {} refcount underflow", entry));
  e.refcount += delta;
  e.last_use = ++clock_;
}

uint64_t DeCache::evict_idle(uint64_t bytes_needed, std::vector<EntryInfo>* evicted) {
  std::lock_guard lk(mu_);
  std::vector<EntryInfo*> idle;
  for (auto& [id, e] : entries_)
    if (e.state == EntryState::Ready && e.refcount == 0) idle.push_back(&e);
  std::sort(idle.begin(), idle.end(), [](auto* a, auto* b) { return a->last_use < b->last_use; });
  uint64_t freed = 0;
  for (auto* e : idle) {
    if (freed >= bytes_needed) break;
    for (auto seg : e->output.segments())
      if (store_->has_segment(seg) && store_->segment(seg).owner == e->owner) store_->delete_segment(seg);
    if (store_->has_account(e->owner)) store_->remove_account(e->owner);
    e->state = EntryState::Evicted;
    live_.erase(e->key);
    freed += e->bytes;
    if (evicted) evicted->push_back(*e);
  }
  return freed;
}

std::optional<EntryInfo> DeCache::entry(uint64_t id) const {
  std::lock_guard lk(mu_);
  auto it = entries_.find(id);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::optional<EntryInfo> DeCache::find(const CacheKey& key) const {
  std::lock_guard lk(mu_);
  auto it = live_.find(key);
  if (it == live_.end()) return std::nullopt;
  return entries_.at(it->second);
}

std::vector<EntryInfo> DeCache::entries() const {
  std::lock_guard lk(mu_);
  std::vector<EntryInfo> out;
  for (auto& [id, e] : entries_) out.push_back(e);
  return out;
}

uint64_t DeCache::ready_bytes() const {
  std::lock_guard lk(mu_);
  uint64_t n = 0;
  for (auto& [id, e] : entries_)
    if (e.state == EntryState::Ready) n += e.bytes;
  return n;
}

bool DeCache::owns_segment(mem::SegmentId seg) const {
  std::lock_guard lk(mu_);
  for (auto& [id, e] : entries_) {
    if (e.state != EntryState::Ready) continue;
    auto segs = e.output.segments();
    if (std::binary_search(segs.begin(), segs.end(), seg)) return true;
  }
  return false;
}

nlohmann::ordered_json DeCache::dump() const {
  std::lock_guard lk(mu_);
  auto out = nlohmann::ordered_json::array();
  for (auto& [id, e] : entries_) {
    nlohmann::ordered_json j;
    j["id"] = e.id;
    j["source"] = e.key.source_path;
    j["dict_columns"] = e.key.dict_columns;
    j["state"] = to_string(e.state);
    j["owner"] = e.owner;
    j["bytes"] = e.bytes;
    j["refcount"] = e.refcount;
    j["last_use"] = e.last_use;
    j["segments"] = e.output.segments();
    out.push_back(std::move(j));
  }
  return out;
}

}  // namespace zsim::dc
