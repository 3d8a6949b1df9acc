#include "zsim/memstore/store.hpp"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <new>
#include <unordered_set>

#include <fmt/format.h>

#include "zsim/util/bytes.hpp"
#include "zsim/util/error.hpp"

namespace zsim::mem {

namespace {
constexpr std::byte kPoison{0xDB};
}

MemCounters MemCounters::operator-(const MemCounters& o) const {
  MemCounters d;
  d.bytes_copied = bytes_copied - o.bytes_copied;
  d.bytes_swapped_out = bytes_swapped_out - o.bytes_swapped_out;
  d.bytes_swapped_in = bytes_swapped_in - o.bytes_swapped_in;
  d.swap_in_events = swap_in_events - o.swap_in_events;
  d.deanon_calls = deanon_calls - o.deanon_calls;
  d.pages_transferred = pages_transferred - o.pages_transferred;
  d.modeled_swap_seconds = modeled_swap_seconds - o.modeled_swap_seconds;
  return d;
}

struct Store::Slab {
  std::byte* mem = nullptr;
  Slab(uint64_t bytes, uint64_t align) {
    mem = static_cast<std::byte*>(std::aligned_alloc(align, bytes));
    if (!mem) throw std::bad_alloc();
  }
  ~Slab() { std::free(mem); }
};

struct Store::Entry {
  PageState::Kind kind = PageState::Kind::Resident;
  uint64_t id = 0;
  uint64_t moved_index = 0;
  std::byte* frame = nullptr;
  std::shared_ptr<Slab> slab;
  AccountId charged_to = kRootAccount;
  uint32_t pins = 0;
  uint64_t stamp = 0;  // LRU key, 0 when not resident
  uint64_t sum = 0;
  bool has_sum = false;
};

struct Store::Container {
  uint64_t id = 0;
  AccountId owner = kRootAccount;
  uint64_t len = 0;
  std::vector<Entry> entries;
  uint32_t refcount = 0;
  std::vector<std::pair<uint64_t, uint64_t>> deanoned;
};

struct Store::Account {
  AccountInfo info;
};

// ---- Pin / SegmentView ----

Pin& Pin::operator=(Pin&& o) noexcept {
  if (this != &o) {
    reset();
    store_ = o.store_;
    locs_ = std::move(o.locs_);
    data_ = o.data_;
    len_ = o.len_;
    writable_ = o.writable_;
    copy_ = std::move(o.copy_);
    if (!copy_.empty()) data_ = copy_.data();
    o.store_ = nullptr;
    o.locs_.clear();
    o.data_ = nullptr;
    o.len_ = 0;
  }
  return *this;
}

std::span<std::byte> Pin::writable() const {
  if (!writable_) fail(ErrorCode::InvalidArgument, "pin is read-only");
  return {data_, len_};
}

void Pin::reset() {
  if (store_ && !locs_.empty()) store_->unpin(*this);
  store_ = nullptr;
  locs_.clear();
  data_ = nullptr;
  len_ = 0;
  copy_.clear();
}

SegmentView::~SegmentView() { store_->release_view(ref_); }

Pin SegmentView::pin(uint64_t offset, uint64_t len, AccountId reader) const {
  if (offset + len > ref_.length)
    fail(ErrorCode::OutOfRange, fmt::format("pin [{}, +{}) outside view of {} bytes", offset, len, ref_.length));
  std::lock_guard lk(store_->mu_);
  return store_->pin_locked(true, ref_.segment, ref_.offset + offset, len, reader, false);
}

// ---- Store ----

Store::Store(StoreConfig cfg) : cfg_(std::move(cfg)) {
  auto ps = cfg_.page_size;
  if (ps < 64 || (ps & (ps - 1)))
    fail(ErrorCode::InvalidConfig, fmt::format("page_size {} is not a power of two >= 64", ps));
  if (cfg_.mem_limit == 0) fail(ErrorCode::InvalidConfig, "mem_limit must be positive");
  if (!(cfg_.swap_write_bw > 0) || !(cfg_.swap_read_bw > 0))
    fail(ErrorCode::InvalidConfig, "swap bandwidths must be positive");
  swap_slots_ = cfg_.swap_capacity / ps;
  swap_ = cfg_.swap_path.empty() ? make_memory_swap(ps) : make_file_swap(cfg_.swap_path, ps);
  auto root = std::make_unique<Account>();
  root->info.id = kRootAccount;
  root->info.name = "root";
  accounts_.emplace(kRootAccount, std::move(root));
}

Store::~Store() = default;

AccountId Store::create_account(std::string name) {
  std::lock_guard lk(mu_);
  auto a = std::make_unique<Account>();
  a->info.id = next_id_++;
  a->info.name = std::move(name);
  auto id = a->info.id;
  accounts_.emplace(id, std::move(a));
  return id;
}

void Store::remove_account(AccountId id) {
  std::lock_guard lk(mu_);
  if (id == kRootAccount) fail(ErrorCode::InvalidArgument, "cannot remove the root account");
  auto it = accounts_.find(id);
  if (it == accounts_.end()) fail(ErrorCode::UnknownAccount, fmt::format("account {}", id));
  auto reparent = [&](Container& c) {
    for (auto& e : c.entries)
      if (e.kind != PageState::Kind::Transferred && e.charged_to == id) e.charged_to = kRootAccount;
  };
  for (auto& [_, c] : regions_) reparent(*c);
  for (auto& [_, c] : segments_) reparent(*c);
  auto& root = accounts_.at(kRootAccount)->info;
  root.mem_charged += it->second->info.mem_charged;
  root.swap_charged += it->second->info.swap_charged;
  accounts_.erase(it);
}

bool Store::has_account(AccountId id) const {
  std::lock_guard lk(mu_);
  return accounts_.count(id) != 0;
}

AccountInfo Store::account(AccountId id) const {
  std::lock_guard lk(mu_);
  auto it = accounts_.find(id);
  if (it == accounts_.end()) fail(ErrorCode::UnknownAccount, fmt::format("account {}", id));
  return it->second->info;
}

Store::Container& Store::region_locked(RegionId id) {
  auto it = regions_.find(id);
  if (it == regions_.end()) fail(ErrorCode::UnknownRegion, fmt::format("region {}", id));
  return *it->second;
}

Store::Container& Store::segment_locked(SegmentId id) {
  auto it = segments_.find(id);
  if (it == segments_.end()) fail(ErrorCode::UnknownSegment, fmt::format("segment {}", id));
  return *it->second;
}

Store::Entry& Store::entry_at(const Loc& loc) {
  auto& c = loc.segment ? segment_locked(loc.container) : region_locked(loc.container);
  return c.entries[loc.index];
}

Store::Loc Store::resolve(Loc loc) {
  if (loc.segment) return loc;
  auto& e = region_locked(loc.container).entries[loc.index];
  if (e.kind != PageState::Kind::Transferred) return loc;
  if (!segments_.count(e.id))
    fail(ErrorCode::DanglingRef, fmt::format("region {} page {} moved to deleted segment {}", loc.container,
                                             loc.index, e.id));
  return Loc{true, e.id, e.moved_index};
}

void Store::touch(const Loc& loc, Entry& e) {
  if (e.stamp) lru_.erase(e.stamp);
  e.stamp = ++clock_;
  lru_.emplace(e.stamp, loc);
}

void Store::untrack(Entry& e) {
  if (e.stamp) lru_.erase(e.stamp);
  e.stamp = 0;
}

void Store::charge(AccountId id, uint64_t mem, uint64_t swap, bool add) {
  auto& a = accounts_.at(id)->info;
  if (add) {
    a.mem_charged += mem;
    a.swap_charged += swap;
  } else {
    a.mem_charged -= mem;
    a.swap_charged -= swap;
  }
}

AccountId Store::alive_or(AccountId preferred, AccountId fallback) const {
  if (accounts_.count(preferred)) return preferred;
  if (accounts_.count(fallback)) return fallback;
  return kRootAccount;
}

std::shared_ptr<Store::Slab> Store::make_slab(uint64_t pages) {
  return std::make_shared<Slab>(pages * cfg_.page_size, cfg_.page_size);
}

uint64_t Store::checksum(const std::byte* p) const {
  uint64_t h = 1469598103934665603ull;
  for (uint64_t i = 0; i < cfg_.page_size; ++i) h = (h ^ uint64_t(p[i])) * 1099511628211ull;
  return h;
}

uint64_t Store::alloc_slot() {
  if (slots_used_ >= swap_slots_) fail(ErrorCode::SwapFull, fmt::format("swap full ({} slots)", swap_slots_));
  uint64_t s;
  if (!free_slots_.empty()) {
    s = *free_slots_.begin();
    free_slots_.erase(free_slots_.begin());
  } else {
    s = next_slot_++;
  }
  ++slots_used_;
  return s;
}

void Store::free_slot(uint64_t slot) {
  swap_->discard(slot);
  free_slots_.insert(slot);
  --slots_used_;
}

std::vector<Store::Loc> Store::lru_candidates(uint64_t pages, const AccountId* only) const {
  std::vector<Loc> out;
  for (auto& [stamp, loc] : lru_) {
    if (out.size() >= pages) break;
    auto& c = loc.segment ? *segments_.at(loc.container) : *regions_.at(loc.container);
    auto& e = c.entries[loc.index];
    if (e.pins) continue;
    if (only && e.charged_to != *only) continue;
    out.push_back(loc);
  }
  return out;
}

void Store::swap_out(const Loc& loc) {
  auto& e = entry_at(loc);
  auto ps = cfg_.page_size;
  uint64_t slot = alloc_slot();
  swap_->write(slot, e.frame);
  std::memset(e.frame, int(kPoison), ps);
  untrack(e);
  charge(e.charged_to, ps, 0, false);
  charge(e.charged_to, 0, ps, true);
  e.kind = PageState::Kind::Swapped;
  e.id = slot;
  --resident_pages_;
  ++swapped_pages_;
  counters_.bytes_swapped_out += ps;
  counters_.modeled_swap_seconds += double(ps) / cfg_.swap_write_bw;
}

void Store::swap_in(const Loc& loc, AccountId reader) {
  auto ps = cfg_.page_size;
  auto& c = loc.segment ? segment_locked(loc.container) : region_locked(loc.container);
  AccountId target = alive_or(c.owner, reader);
  ensure_room(target, ps);
  auto& e = c.entries[loc.index];
  swap_->read(e.id, e.frame);
  free_slot(e.id);
  charge(e.charged_to, 0, ps, false);
  charge(target, ps, 0, true);
  e.charged_to = target;
  e.kind = PageState::Kind::Resident;
  e.id = next_page_id_++;
  ++resident_pages_;
  --swapped_pages_;
  ++counters_.swap_in_events;
  counters_.bytes_swapped_in += ps;
  counters_.modeled_swap_seconds += double(ps) / cfg_.swap_read_bw;
  touch(loc, e);
}

void Store::ensure_room(AccountId account, uint64_t bytes) {
  auto ps = cfg_.page_size;
  auto& a = accounts_.at(account)->info;
  if (a.limit && a.mem_charged + bytes > *a.limit) {
    evict_account(account, a.mem_charged + bytes - *a.limit);
    if (a.mem_charged + bytes > *a.limit)
      fail(ErrorCode::OutOfMemory, fmt::format("account {} limit {} exceeded", account, *a.limit));
  }
  uint64_t resident = resident_pages_ * ps;
  if (resident + bytes <= cfg_.mem_limit) return;
  uint64_t pages = ceil_div(resident + bytes - cfg_.mem_limit, ps);
  auto cand = lru_candidates(pages, nullptr);
  if (cand.size() < pages || swap_slots_ - slots_used_ < pages)
    fail(ErrorCode::OutOfMemory,
         fmt::format("cannot reclaim {} pages (evictable {}, free swap slots {})", pages, cand.size(),
                     swap_slots_ - slots_used_));
  for (auto& loc : cand) swap_out(loc);
}

void Store::evict_account(AccountId account, uint64_t bytes) {
  uint64_t pages = ceil_div(bytes, cfg_.page_size);
  std::vector<Loc> seg, reg;
  for (auto& [stamp, loc] : lru_) {
    auto& c = loc.segment ? *segments_.at(loc.container) : *regions_.at(loc.container);
    auto& e = c.entries[loc.index];
    if (e.pins || e.charged_to != account) continue;
    (loc.segment ? seg : reg).push_back(loc);
  }
  seg.insert(seg.end(), reg.begin(), reg.end());
  if (seg.size() > pages) seg.resize(pages);
  if (swap_slots_ - slots_used_ < seg.size())
    fail(ErrorCode::SwapFull, fmt::format("limit drop needs {} slots, {} free", seg.size(),
                                          swap_slots_ - slots_used_));
  for (auto& loc : seg) swap_out(loc);
}

RegionId Store::alloc_anon(AccountId account, uint64_t len) {
  std::lock_guard lk(mu_);
  if (len == 0) fail(ErrorCode::InvalidArgument, "zero-length region");
  if (!accounts_.count(account)) fail(ErrorCode::UnknownAccount, fmt::format("account {}", account));
  auto ps = cfg_.page_size;
  uint64_t n = ceil_div(len, ps);
  ensure_room(account, n * ps);
  auto slab = make_slab(n);
  auto c = std::make_unique<Container>();
  c->id = next_id_++;
  c->owner = account;
  c->len = len;
  c->entries.resize(n);
  for (uint64_t i = 0; i < n; ++i) {
    auto& e = c->entries[i];
    e.id = next_page_id_++;
    e.frame = slab->mem + i * ps;
    e.slab = slab;
    e.charged_to = account;
    touch(Loc{false, c->id, i}, e);
  }
  auto& a = accounts_.at(account)->info;
  a.mem_charged += n * ps;
  a.anon_allocated += len;
  resident_pages_ += n;
  auto id = c->id;
  regions_.emplace(id, std::move(c));
  return id;
}

void Store::release_entry(Entry& e) {
  auto ps = cfg_.page_size;
  switch (e.kind) {
    case PageState::Kind::Resident:
      untrack(e);
      charge(e.charged_to, ps, 0, false);
      --resident_pages_;
      break;
    case PageState::Kind::Swapped:
      free_slot(e.id);
      charge(e.charged_to, 0, ps, false);
      --swapped_pages_;
      break;
    case PageState::Kind::Transferred:
      break;
  }
  e.slab.reset();
}

void Store::free_region(RegionId id) {
  std::lock_guard lk(mu_);
  auto& c = region_locked(id);
  for (auto& e : c.entries)
    if (e.kind != PageState::Kind::Transferred && e.pins)
      fail(ErrorCode::BusySegment, fmt::format("region {} has pinned pages", id));
  for (auto& e : c.entries) release_entry(e);
  regions_.erase(id);
}

std::vector<PageState> Store::region_pages(RegionId id) const {
  std::lock_guard lk(mu_);
  auto it = regions_.find(id);
  if (it == regions_.end()) fail(ErrorCode::UnknownRegion, fmt::format("region {}", id));
  std::vector<PageState> out;
  for (auto& e : it->second->entries) out.push_back({e.kind, e.id});
  return out;
}

SegmentId Store::new_segment(AccountId account) {
  std::lock_guard lk(mu_);
  if (!accounts_.count(account)) fail(ErrorCode::UnknownAccount, fmt::format("account {}", account));
  auto c = std::make_unique<Container>();
  c->id = next_id_++;
  c->owner = account;
  auto id = c->id;
  segments_.emplace(id, std::move(c));
  return id;
}

SegRef Store::deanon(SegmentId segment, RegionId region, uint64_t start, uint64_t end) {
  std::lock_guard lk(mu_);
  auto& seg = segment_locked(segment);
  auto& reg = region_locked(region);
  auto ps = cfg_.page_size;
  // New pages of a segment whose owner is gone are charged to root.
  const AccountId owner = alive_or(seg.owner, kRootAccount);
  if (!(start < end && end <= reg.len))
    fail(ErrorCode::OutOfRange, fmt::format("deanon range [{}, {}) outside region of {} bytes", start, end, reg.len));
  for (auto& [s, e] : reg.deanoned)
    if (start < e && s < end)
      fail(ErrorCode::AlreadyShared, fmt::format("range [{}, {}) overlaps de-anonymized [{}, {})", start, end, s, e));
  uint64_t first = start / ps, last = (end - 1) / ps;
  for (uint64_t i = first; i <= last; ++i)
    if (reg.entries[i].kind == PageState::Kind::Transferred)
      fail(ErrorCode::AlreadyShared, fmt::format("region {} page {} already transferred", region, i));

  auto is_full = [&](uint64_t i) { return start <= i * ps && (i + 1) * ps <= end; };
  uint64_t partial = 0;
  for (uint64_t i = first; i <= last; ++i) partial += !is_full(i);

  // Hold the range while making room so reclaim cannot pick it.
  for (uint64_t i = first; i <= last; ++i) ++reg.entries[i].pins;
  auto restore = [&] {
    for (uint64_t i = first; i <= last; ++i) --reg.entries[i].pins;
  };
  try {
    if (!cfg_.direct_swap_enabled)
      for (uint64_t i = first; i <= last; ++i)
        if (reg.entries[i].kind == PageState::Kind::Swapped) swap_in(Loc{false, region, i}, reg.owner);
    ensure_room(owner, partial * ps);
  } catch (...) {
    restore();
    throw;
  }
  restore();

  uint64_t old_pages = seg.entries.size();
  uint64_t seg_offset = old_pages * ps + start % ps;
  uint64_t new_len = seg_offset + (end - start);
  seg.entries.resize(ceil_div(new_len, ps));
  for (uint64_t i = first; i <= last; ++i) {
    uint64_t j = old_pages + (i - first);
    auto& e = reg.entries[i];
    auto& d = seg.entries[j];
    Loc dloc{true, segment, j};
    if (is_full(i)) {
      d = std::move(e);
      if (d.charged_to != owner) {
        bool res = d.kind == PageState::Kind::Resident;
        charge(d.charged_to, res ? ps : 0, res ? 0 : ps, false);
        charge(owner, res ? ps : 0, res ? 0 : ps, true);
      }
      d.charged_to = owner;
      if (d.kind == PageState::Kind::Resident) {
        lru_[d.stamp] = dloc;
        if (cfg_.verify_immutable) {
          d.sum = checksum(d.frame);
          d.has_sum = true;
        }
      }
      e = Entry{};
      e.kind = PageState::Kind::Transferred;
      e.id = segment;
      e.moved_index = j;
      ++counters_.pages_transferred;
    } else {
      uint64_t lo = std::max(start, i * ps), hi = std::min(end, (i + 1) * ps);
      auto fresh = make_slab(1);
      bool swapped = e.kind == PageState::Kind::Swapped;
      if (e.pins == 0) {
        // The segment keeps the original frame so the mapped range stays
        // contiguous; the region continues on a private copy.
        if (swapped) swap_->read(e.id, e.frame);
        else std::memcpy(fresh->mem, e.frame, ps);
        d.frame = e.frame;
        d.slab = std::move(e.slab);
        e.frame = fresh->mem;
        e.slab = fresh;
      } else {
        if (swapped) swap_->read(e.id, fresh->mem);
        else std::memcpy(fresh->mem, e.frame, ps);
        d.frame = fresh->mem;
        d.slab = fresh;
      }
      if (swapped) counters_.modeled_swap_seconds += double(ps) / cfg_.swap_read_bw;
      d.kind = PageState::Kind::Resident;
      d.id = next_page_id_++;
      d.charged_to = owner;
      charge(owner, ps, 0, true);
      ++resident_pages_;
      touch(dloc, d);
      counters_.bytes_copied += hi - lo;
    }
  }
  reg.deanoned.emplace_back(start, end);
  seg.len = new_len;
  ++counters_.deanon_calls;
  return SegRef{segment, seg_offset, end - start};
}

SegRef Store::append_bytes(SegmentId segment, std::span<const std::byte> data) {
  std::lock_guard lk(mu_);
  auto& seg = segment_locked(segment);
  auto ps = cfg_.page_size;
  const AccountId owner = alive_or(seg.owner, kRootAccount);
  uint64_t old_pages = seg.entries.size();
  uint64_t offset = old_pages * ps;
  if (data.empty()) return SegRef{segment, offset, 0};
  uint64_t n = ceil_div(data.size(), ps);
  ensure_room(owner, n * ps);
  auto slab = make_slab(n);
  std::memcpy(slab->mem, data.data(), data.size());
  seg.entries.resize(old_pages + n);
  for (uint64_t i = 0; i < n; ++i) {
    auto& e = seg.entries[old_pages + i];
    e.id = next_page_id_++;
    e.frame = slab->mem + i * ps;
    e.slab = slab;
    e.charged_to = owner;
    touch(Loc{true, segment, old_pages + i}, e);
  }
  charge(owner, n * ps, 0, true);
  resident_pages_ += n;
  seg.len = offset + data.size();
  counters_.bytes_copied += data.size();
  return SegRef{segment, offset, data.size()};
}

std::shared_ptr<SegmentView> Store::map_ref(const SegRef& ref) {
  std::lock_guard lk(mu_);
  auto it = segments_.find(ref.segment);
  if (it == segments_.end()) fail(ErrorCode::DanglingRef, fmt::format("segment {} does not exist", ref.segment));
  if (ref.offset + ref.length > it->second->len)
    fail(ErrorCode::OutOfRange, fmt::format("ref [{}, +{}) beyond segment {} length {}", ref.offset, ref.length,
                                            ref.segment, it->second->len));
  ++it->second->refcount;
  return std::shared_ptr<SegmentView>(new SegmentView(this, ref));
}

void Store::record_copy(uint64_t bytes) {
  std::lock_guard lk(mu_);
  counters_.bytes_copied += bytes;
}

void Store::release_view(const SegRef& ref) {
  std::lock_guard lk(mu_);
  auto it = segments_.find(ref.segment);
  if (it != segments_.end() && it->second->refcount) --it->second->refcount;
}

void Store::delete_segment(SegmentId id) {
  std::lock_guard lk(mu_);
  auto& c = segment_locked(id);
  if (c.refcount) fail(ErrorCode::BusySegment, fmt::format("segment {} has {} live views", id, c.refcount));
  for (auto& e : c.entries)
    if (e.pins) fail(ErrorCode::BusySegment, fmt::format("segment {} has pinned pages", id));
  if (cfg_.verify_immutable)
    for (auto& e : c.entries)
      if (e.has_sum && e.kind == PageState::Kind::Resident && checksum(e.frame) != e.sum)
        fail(ErrorCode::Internal, fmt::format("segment {} page modified after de-anonymization", id));
  for (auto& e : c.entries) release_entry(e);
  segments_.erase(id);
}

bool Store::has_segment(SegmentId id) const {
  std::lock_guard lk(mu_);
  return segments_.count(id) != 0;
}

SegmentInfo Store::segment(SegmentId id) const {
  std::lock_guard lk(mu_);
  auto it = segments_.find(id);
  if (it == segments_.end()) fail(ErrorCode::UnknownSegment, fmt::format("segment {}", id));
  auto& c = *it->second;
  SegmentInfo s{id, c.owner, c.len, c.refcount, 0, 0};
  for (auto& e : c.entries) (e.kind == PageState::Kind::Resident ? s.resident_pages : s.swapped_pages)++;
  return s;
}

std::vector<PageState> Store::segment_pages(SegmentId id) const {
  std::lock_guard lk(mu_);
  auto it = segments_.find(id);
  if (it == segments_.end()) fail(ErrorCode::UnknownSegment, fmt::format("segment {}", id));
  std::vector<PageState> out;
  for (auto& e : it->second->entries) out.push_back({e.kind, e.id});
  return out;
}

std::vector<SegmentId> Store::segments() const {
  std::lock_guard lk(mu_);
  std::vector<SegmentId> out;
  for (auto& [id, _] : segments_) out.push_back(id);
  return out;
}

uint64_t Store::swapped_bytes(const SegRef& ref) const {
  std::lock_guard lk(mu_);
  auto it = segments_.find(ref.segment);
  if (it == segments_.end() || ref.length == 0) return 0;
  auto ps = cfg_.page_size;
  auto& c = *it->second;
  uint64_t n = 0;
  for (uint64_t i = ref.offset / ps; i <= (ref.offset + ref.length - 1) / ps && i < c.entries.size(); ++i)
    if (c.entries[i].kind == PageState::Kind::Swapped) n += ps;
  return n;
}

uint64_t Store::resident_bytes(SegmentId id) const {
  std::lock_guard lk(mu_);
  auto it = segments_.find(id);
  if (it == segments_.end()) return 0;
  uint64_t n = 0;
  for (auto& e : it->second->entries) n += e.kind == PageState::Kind::Resident;
  return n * cfg_.page_size;
}

void Store::set_limit(AccountId account, std::optional<uint64_t> limit) {
  std::lock_guard lk(mu_);
  auto it = accounts_.find(account);
  if (it == accounts_.end()) fail(ErrorCode::UnknownAccount, fmt::format("account {}", account));
  auto& a = it->second->info;
  a.limit = limit;
  if (limit && a.mem_charged > *limit) evict_account(account, a.mem_charged - *limit);
}

uint64_t Store::reclaim_global(uint64_t bytes_needed) {
  std::lock_guard lk(mu_);
  if (bytes_needed == 0) return 0;
  uint64_t pages = ceil_div(bytes_needed, cfg_.page_size);
  auto cand = lru_candidates(pages, nullptr);
  if (cand.size() < pages || swap_slots_ - slots_used_ < pages)
    fail(ErrorCode::SwapFull, fmt::format("cannot reclaim {} pages (evictable {}, free swap slots {})", pages,
                                          cand.size(), swap_slots_ - slots_used_));
  for (auto& loc : cand) swap_out(loc);
  return pages * cfg_.page_size;
}

Pin Store::pin_region(RegionId id, uint64_t offset, uint64_t len, bool writable) {
  std::lock_guard lk(mu_);
  return pin_locked(false, id, offset, len, region_locked(id).owner, writable);
}

Pin Store::pin_segment(SegmentId id, uint64_t offset, uint64_t len, AccountId reader) {
  std::lock_guard lk(mu_);
  if (!segments_.count(id)) fail(ErrorCode::DanglingRef, fmt::format("segment {} does not exist", id));
  return pin_locked(true, id, offset, len, reader, false);
}

Pin Store::pin_locked(bool segment, uint64_t container, uint64_t offset, uint64_t len, AccountId reader,
                      bool writable) {
  Pin p;
  p.store_ = this;
  p.len_ = len;
  p.writable_ = writable;
  if (len == 0) return p;
  auto& c = segment ? segment_locked(container) : region_locked(container);
  if (offset + len > c.len)
    fail(ErrorCode::OutOfRange, fmt::format("pin [{}, +{}) beyond length {}", offset, len, c.len));
  auto ps = cfg_.page_size;
  uint64_t first = offset / ps, last = (offset + len - 1) / ps;
  std::vector<Loc> locs;
  for (uint64_t i = first; i <= last; ++i) {
    Loc l{segment, container, i};
    if (!segment && c.entries[i].kind == PageState::Kind::Transferred) {
      if (writable) fail(ErrorCode::InvalidArgument, "write to a de-anonymized page");
      l = resolve(l);
    }
    locs.push_back(l);
  }
  for (auto& l : locs) ++entry_at(l).pins;
  try {
    for (auto& l : locs)
      if (entry_at(l).kind == PageState::Kind::Swapped) swap_in(l, reader);
  } catch (...) {
    for (auto& l : locs) --entry_at(l).pins;
    throw;
  }
  std::vector<std::byte*> frames;
  for (auto& l : locs) {
    auto& e = entry_at(l);
    touch(l, e);
    frames.push_back(e.frame);
  }
  bool contiguous = true;
  for (size_t i = 1; i < frames.size(); ++i) contiguous &= frames[i] == frames[i - 1] + ps;
  if (contiguous) {
    p.data_ = frames[0] + offset % ps;
  } else {
    if (writable) fail(ErrorCode::Internal, "writable pin over non-contiguous frames");
    p.copy_.resize(len);
    uint64_t done = 0, pos = offset;
    for (size_t i = 0; i < frames.size(); ++i) {
      uint64_t in_page = pos % ps, n = std::min(ps - in_page, len - done);
      std::memcpy(p.copy_.data() + done, frames[i] + in_page, n);
      done += n;
      pos += n;
    }
    p.data_ = p.copy_.data();
  }
  p.locs_ = std::move(locs);
  return p;
}

void Store::unpin(Pin& p) {
  std::lock_guard lk(mu_);
  for (auto& l : p.locs_) {
    Loc r = l;
    if (!r.segment) {
      auto it = regions_.find(r.container);
      if (it == regions_.end()) continue;
      auto& e = it->second->entries[r.index];
      if (e.kind == PageState::Kind::Transferred) r = Loc{true, e.id, e.moved_index};
    }
    if (r.segment) {
      auto it = segments_.find(r.container);
      if (it == segments_.end()) continue;
      auto& e = it->second->entries[r.index];
      if (e.pins) --e.pins;
    } else {
      auto& e = regions_.at(r.container)->entries[r.index];
      if (e.pins) --e.pins;
    }
  }
}

MemCounters Store::stats() const {
  std::lock_guard lk(mu_);
  return counters_;
}

uint64_t Store::resident_bytes() const {
  std::lock_guard lk(mu_);
  return resident_pages_ * cfg_.page_size;
}

uint64_t Store::swapped_bytes() const {
  std::lock_guard lk(mu_);
  return swapped_pages_ * cfg_.page_size;
}

InvariantReport Store::check_invariants() const {
  std::lock_guard lk(mu_);
  InvariantReport r;
  auto bad = [&](std::string msg) {
    ++r.violations;
    if (r.messages.size() < 32) r.messages.push_back(std::move(msg));
  };
  auto ps = cfg_.page_size;
  std::unordered_set<uint64_t> pages, slots;
  std::unordered_map<AccountId, std::pair<uint64_t, uint64_t>> charged;
  uint64_t resident = 0, swapped = 0;
  auto scan = [&](const Container& c, bool segment) {
    if (c.entries.size() != ceil_div(c.len, ps))
      bad(fmt::format("{} {}: {} entries for {} bytes", segment ? "segment" : "region", c.id, c.entries.size(),
                      c.len));
    for (auto& e : c.entries) {
      switch (e.kind) {
        case PageState::Kind::Resident:
          if (!pages.insert(e.id).second) bad(fmt::format("page id {} owned twice", e.id));
          charged[e.charged_to].first += ps;
          ++resident;
          if (!e.stamp || !lru_.count(e.stamp)) bad(fmt::format("resident page {} missing from LRU", e.id));
          break;
        case PageState::Kind::Swapped:
          if (!slots.insert(e.id).second) bad(fmt::format("swap slot {} owned twice", e.id));
          charged[e.charged_to].second += ps;
          ++swapped;
          break;
        case PageState::Kind::Transferred:
          if (segment) bad(fmt::format("segment {} holds a transferred entry", c.id));
          break;
      }
      if (e.kind != PageState::Kind::Transferred && !accounts_.count(e.charged_to))
        bad(fmt::format("page charged to missing account {}", e.charged_to));
    }
  };
  for (auto& [_, c] : regions_) scan(*c, false);
  for (auto& [_, c] : segments_) scan(*c, true);
  if (resident != resident_pages_) bad(fmt::format("resident count {} != tracked {}", resident, resident_pages_));
  if (swapped != swapped_pages_) bad(fmt::format("swapped count {} != tracked {}", swapped, swapped_pages_));
  if (slots.size() != slots_used_) bad(fmt::format("{} slots in use, {} tracked", slots.size(), slots_used_));
  if (lru_.size() != resident) bad(fmt::format("LRU holds {} pages, {} resident", lru_.size(), resident));
  uint64_t mem_sum = 0, swap_sum = 0;
  for (auto& [id, a] : accounts_) {
    auto [m, s] = charged.count(id) ? charged.at(id) : std::pair<uint64_t, uint64_t>{0, 0};
    if (a->info.mem_charged != m || a->info.swap_charged != s)
      bad(fmt::format("account {} charged mem {} swap {}, pages say {} / {}", id, a->info.mem_charged,
                      a->info.swap_charged, m, s));
    mem_sum += a->info.mem_charged;
    swap_sum += a->info.swap_charged;
  }
  if (mem_sum != resident * ps) bad(fmt::format("mem charges {} != resident bytes {}", mem_sum, resident * ps));
  if (swap_sum != swapped * ps) bad(fmt::format("swap charges {} != swapped bytes {}", swap_sum, swapped * ps));
  return r;
}

}  // namespace zsim::mem
