#pragma once

#include <compare>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "zsim/sipc/sipc.hpp"

// Deserialization cache of loader outputs, keyed by source and load options.
namespace zsim::dc {

struct CacheKey {
  std::string source_path;
  std::set<std::string> dict_columns;
  auto operator<=>(const CacheKey&) const = default;
};

enum class EntryState { Loading, Ready, Evicted };

struct EntryInfo {
  uint64_t id = 0;
  CacheKey key;
  EntryState state = EntryState::Loading;
  sipc::StoredOutput output;
  mem::AccountId owner = 0;
  uint64_t bytes = 0;
  int64_t refcount = 0;
  uint64_t last_use = 0;
};

struct Ticket {
  uint64_t entry = 0;
};

struct Lookup {
  enum class Kind { Hit, Ticket, Pending } kind = Kind::Ticket;
  uint64_t entry = 0;  // Hit and Pending
  Ticket ticket;       // Ticket only
};

class DeCache {
 public:
  explicit DeCache(mem::Store* store) : store_(store) {}

  // Non-blocking: Pending while another caller holds the ticket.
  Lookup lookup_or_begin(const CacheKey& key);
  // Blocks until a Loading entry finishes; never returns Pending.
  Lookup get_or_begin(const CacheKey& key);
  // Throws StaleTicket on double finish.
  EntryInfo finish(const Ticket& t, const sipc::StoredOutput& output, mem::AccountId owner);
  // Gives up a ticket; waiters retry.
  void abandon(const Ticket& t);
  // Throws RefcountError on underflow or a non-Ready entry.
  void pin(uint64_t entry, int delta);
  // Evicts zero-refcount Ready entries, least recently used first, deleting
  // their segments and owner accounts. Returns recorded bytes freed.
  uint64_t evict_idle(uint64_t bytes_needed, std::vector<EntryInfo>* evicted = nullptr);

  std::optional<EntryInfo> entry(uint64_t id) const;
  std::optional<EntryInfo> find(const CacheKey& key) const;
  std::vector<EntryInfo> entries() const;
  uint64_t ready_bytes() const;
  // Segment belongs to a Ready entry.
  bool owns_segment(mem::SegmentId id) const;
  nlohmann::ordered_json dump() const;

 private:
  Lookup lookup_locked(const CacheKey& key);

  mem::Store* store_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::map<uint64_t, EntryInfo> entries_;
  std::map<CacheKey, uint64_t> live_;  // key -> non-Evicted entry
  uint64_t next_id_ = 1;
  uint64_t clock_ = 0;
};

std::string_view to_string(EntryState s);

}  // namespace zsim::dc
