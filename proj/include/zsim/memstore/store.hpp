#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "zsim/memstore/swap_device.hpp"

namespace zsim::mem {

using AccountId = uint64_t;
using RegionId = uint64_t;
using SegmentId = uint64_t;

// Charges of removed accounts are reparented here.
inline constexpr AccountId kRootAccount = 0;

struct StoreConfig {
  uint64_t page_size = 4096;
  uint64_t mem_limit = 50ull << 20;
  uint64_t swap_capacity = 1ull << 30;
  double swap_write_bw = 2e9;  // bytes per modeled second
  double swap_read_bw = 2e9;
  bool direct_swap_enabled = true;
  std::string swap_path;  // empty: in-memory swap
#ifdef NDEBUG
  bool verify_immutable = false;
#else
  bool verify_immutable = true;
#endif
};

struct MemCounters {
  uint64_t bytes_copied = 0;
  uint64_t bytes_swapped_out = 0;
  uint64_t bytes_swapped_in = 0;
  uint64_t swap_in_events = 0;
  uint64_t deanon_calls = 0;
  uint64_t pages_transferred = 0;
  double modeled_swap_seconds = 0;

  MemCounters operator-(const MemCounters& o) const;
  bool operator==(const MemCounters&) const = default;
};

struct SegRef {
  SegmentId segment = 0;
  uint64_t offset = 0;
  uint64_t length = 0;
  auto operator<=>(const SegRef&) const = default;
};

struct PageState {
  // Transferred marks a region page whose frame now belongs to a segment;
  // it owns nothing and is unusable through the region.
  enum class Kind : uint8_t { Resident, Swapped, Transferred };
  Kind kind;
  uint64_t id;  // page id, swap slot, or owning segment
  bool operator==(const PageState&) const = default;
};

struct AccountInfo {
  AccountId id = 0;
  std::string name;
  uint64_t mem_charged = 0;
  uint64_t swap_charged = 0;
  std::optional<uint64_t> limit;
  uint64_t anon_allocated = 0;  // cumulative
};

struct SegmentInfo {
  SegmentId id = 0;
  AccountId owner = 0;
  uint64_t len = 0;
  uint32_t refcount = 0;
  uint64_t resident_pages = 0;
  uint64_t swapped_pages = 0;
};

struct InvariantReport {
  uint64_t violations = 0;
  std::vector<std::string> messages;
  bool ok() const { return violations == 0; }
};

class Store;

// Keeps a byte range resident and unevictable while alive.
class Pin {
 public:
  Pin() = default;
  Pin(Pin&& o) noexcept { *this = std::move(o); }
  Pin& operator=(Pin&& o) noexcept;
  Pin(const Pin&) = delete;
  Pin& operator=(const Pin&) = delete;
  ~Pin() { reset(); }

  std::span<const std::byte> bytes() const { return {data_, len_}; }
  // Only valid for writable region pins.
  std::span<std::byte> writable() const;
  const std::byte* data() const { return data_; }
  uint64_t size() const { return len_; }
  void reset();

 private:
  friend class Store;
  struct Loc {
    bool segment;
    uint64_t container;
    uint64_t index;
  };
  Store* store_ = nullptr;
  std::vector<Loc> locs_;
  std::byte* data_ = nullptr;
  uint64_t len_ = 0;
  bool writable_ = false;
  std::vector<std::byte> copy_;  // set when frames are not contiguous
};

// A mapped segment range; holds one segment reference while alive.
class SegmentView {
 public:
  SegmentView(const SegmentView&) = delete;
  SegmentView& operator=(const SegmentView&) = delete;
  ~SegmentView();

  const SegRef& ref() const { return ref_; }
  // Pin [offset, offset+len) relative to the view.
  Pin pin(uint64_t offset, uint64_t len, AccountId reader) const;
  Pin pin_all(AccountId reader) const { return pin(0, ref_.length, reader); }

 private:
  friend class Store;
  SegmentView(Store* s, SegRef r) : store_(s), ref_(r) {}
  Store* store_;
  SegRef ref_;
};

class Store {
 public:
  explicit Store(StoreConfig cfg);
  ~Store();
  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  const StoreConfig& config() const { return cfg_; }
  uint64_t page_size() const { return cfg_.page_size; }

  AccountId create_account(std::string name = {});
  void remove_account(AccountId id);
  bool has_account(AccountId id) const;
  AccountInfo account(AccountId id) const;

  RegionId alloc_anon(AccountId account, uint64_t len);
  void free_region(RegionId id);
  std::vector<PageState> region_pages(RegionId id) const;

  SegmentId new_segment(AccountId account);
  SegRef deanon(SegmentId segment, RegionId region, uint64_t start, uint64_t end);
  // Copying append used for sink writes; counted in bytes_copied.
  SegRef append_bytes(SegmentId segment, std::span<const std::byte> data);
  std::shared_ptr<SegmentView> map_ref(const SegRef& ref);
  // Account for a copy performed by a client outside the store.
  void record_copy(uint64_t bytes);
  void delete_segment(SegmentId id);
  bool has_segment(SegmentId id) const;
  SegmentInfo segment(SegmentId id) const;
  std::vector<PageState> segment_pages(SegmentId id) const;
  std::vector<SegmentId> segments() const;
  // Bytes of swapped pages overlapping the range.
  uint64_t swapped_bytes(const SegRef& ref) const;
  uint64_t resident_bytes(SegmentId id) const;

  void set_limit(AccountId account, std::optional<uint64_t> limit);
  uint64_t reclaim_global(uint64_t bytes_needed);

  Pin pin_region(RegionId id, uint64_t offset, uint64_t len, bool writable);
  // Throws DanglingRef if the segment is gone.
  Pin pin_segment(SegmentId id, uint64_t offset, uint64_t len, AccountId reader);

  MemCounters stats() const;
  uint64_t resident_bytes() const;
  uint64_t swapped_bytes() const;
  InvariantReport check_invariants() const;

 private:
  friend class Pin;
  friend class SegmentView;

  struct Slab;
  struct Entry;
  struct Container;
  struct Account;
  using Loc = Pin::Loc;

  Container& region_locked(RegionId id);
  Container& segment_locked(SegmentId id);
  Entry& entry_at(const Loc& loc);
  Loc resolve(Loc loc);
  void touch(const Loc& loc, Entry& e);
  void untrack(Entry& e);
  void charge(AccountId id, uint64_t mem, uint64_t swap, bool add);
  AccountId alive_or(AccountId preferred, AccountId fallback) const;
  void ensure_room(AccountId account, uint64_t bytes);
  std::vector<Loc> lru_candidates(uint64_t pages, const AccountId* only) const;
  void swap_out(const Loc& loc);
  void swap_in(const Loc& loc, AccountId reader);
  uint64_t alloc_slot();
  void free_slot(uint64_t slot);
  void release_entry(Entry& e);
  void evict_account(AccountId account, uint64_t bytes);
  Pin pin_locked(bool segment, uint64_t container, uint64_t offset, uint64_t len, AccountId reader,
                 bool writable);
  void unpin(Pin& p);
  void release_view(const SegRef& ref);
  std::shared_ptr<Slab> make_slab(uint64_t pages);
  uint64_t checksum(const std::byte* p) const;

  StoreConfig cfg_;
  mutable std::mutex mu_;
  std::unique_ptr<SwapDevice> swap_;
  std::unordered_map<AccountId, std::unique_ptr<Account>> accounts_;
  std::unordered_map<RegionId, std::unique_ptr<Container>> regions_;
  std::map<SegmentId, std::unique_ptr<Container>> segments_;
  std::map<uint64_t, Loc> lru_;  // touch stamp -> resident page
  std::set<uint64_t> free_slots_;
  uint64_t next_slot_ = 0;
  uint64_t slots_used_ = 0;
  uint64_t swap_slots_ = 0;
  uint64_t next_page_id_ = 1;
  uint64_t next_id_ = 1;
  uint64_t clock_ = 0;
  uint64_t resident_pages_ = 0;
  uint64_t swapped_pages_ = 0;
  MemCounters counters_;
};

}  // namespace zsim::mem
