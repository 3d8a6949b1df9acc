#include "zsim/columnar/buffer.hpp"

#include <atomic>
#include <cstring>

#include <fmt/format.h>

#include "zsim/util/error.hpp"

namespace zsim::col {

namespace {
std::atomic<uint64_t> g_next_buffer_id{1};
}

BufferCore::~BufferCore() {
  if (region_) {
    try {
      store_->free_region(region_);
    } catch (const Error&) {
      // Store torn down or region already gone; nothing left to release.
    }
  }
}

Backing BufferCore::backing() const {
  std::lock_guard lk(mu_);
  if (kind_ == BackingKind::Anonymous) return Backing{kind_, region_, 0};
  return Backing{kind_, seg_.segment, seg_.offset};
}

bool BufferCore::immutable() const {
  std::lock_guard lk(mu_);
  return kind_ == BackingKind::SegmentRef;
}

mem::Pin BufferCore::pin(uint64_t offset, uint64_t len) const {
  mem::SegRef seg;
  {
    std::lock_guard lk(mu_);
    if (kind_ == BackingKind::Anonymous) return store_->pin_region(region_, offset, len, false);
    seg = seg_;
  }
  return store_->pin_segment(seg.segment, seg.offset + offset, len, reader_);
}

std::shared_ptr<BufferCore> BufferCore::anonymous(const MemoryContext& ctx, uint64_t len) {
  std::shared_ptr<BufferCore> c(new BufferCore());
  c->id_ = g_next_buffer_id++;
  c->len_ = len;
  c->store_ = ctx.store;
  c->reader_ = ctx.account;
  c->region_ = ctx.store->alloc_anon(ctx.account, len);
  return c;
}

std::shared_ptr<BufferCore> BufferCore::mapped(mem::Store* store, mem::SegRef ref, mem::AccountId reader,
                                               std::vector<std::shared_ptr<mem::SegmentView>> views) {
  std::shared_ptr<BufferCore> c(new BufferCore());
  c->id_ = g_next_buffer_id++;
  c->len_ = ref.length;
  c->store_ = store;
  c->reader_ = reader;
  c->kind_ = BackingKind::SegmentRef;
  c->seg_ = ref;
  c->views_ = std::move(views);
  return c;
}

void BufferCore::mark_deanonymized(const mem::SegRef& ref) {
  std::lock_guard lk(mu_);
  kind_ = BackingKind::SegmentRef;
  seg_ = ref;
}

Buffer::Buffer(std::shared_ptr<BufferCore> core, uint64_t offset, uint64_t len)
    : core_(std::move(core)), offset_(offset), len_(len) {
  if (core_ && offset_ + len_ > core_->size())
    fail(ErrorCode::OutOfRange, fmt::format("buffer view [{}, +{}) beyond core of {} bytes", offset_, len_,
                                            core_->size()));
}

Backing Buffer::backing() const {
  auto b = core_->backing();
  b.offset += offset_;
  return b;
}

Buffer Buffer::view(uint64_t offset, uint64_t len) const {
  if (offset + len > len_)
    fail(ErrorCode::OutOfRange, fmt::format("view [{}, +{}) beyond buffer of {} bytes", offset, len, len_));
  return Buffer(core_, offset_ + offset, len);
}

BufferPin Buffer::pin() const {
  if (!core_) return {};
  return BufferPin(core_->pin(offset_, len_));
}

std::vector<std::byte> Buffer::copy_bytes() const {
  auto p = pin();
  return std::vector<std::byte>(p.data(), p.data() + p.size());
}

WritableBuffer::WritableBuffer(const MemoryContext& ctx, uint64_t len) : len_(len) {
  if (len == 0) return;
  core_ = BufferCore::anonymous(ctx, len);
  pin_ = ctx.store->pin_region(core_->region(), 0, len, true);
  data_ = pin_.writable().data();
}

Buffer WritableBuffer::seal() {
  if (!core_) return {};
  pin_.reset();
  data_ = nullptr;
  auto core = std::move(core_);
  return Buffer(core, 0, len_);
}

Buffer make_buffer(const MemoryContext& ctx, std::span<const std::byte> bytes) {
  WritableBuffer w(ctx, bytes.size());
  if (!bytes.empty()) std::memcpy(w.data(), bytes.data(), bytes.size());
  return w.seal();
}

}  // namespace zsim::col
