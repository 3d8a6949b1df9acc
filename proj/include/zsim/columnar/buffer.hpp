#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "zsim/memstore/store.hpp"

namespace zsim::col {

// Where buffers are allocated and whom they are charged to.
struct MemoryContext {
  mem::Store* store = nullptr;
  mem::AccountId account = mem::kRootAccount;
};

enum class BackingKind : uint8_t { Anonymous, SegmentRef };

struct Backing {
  BackingKind kind = BackingKind::Anonymous;
  uint64_t id = 0;      // region or segment
  uint64_t offset = 0;  // byte offset within it
  bool operator==(const Backing&) const = default;
};

// Shared physical allocation behind one or more Buffer views.
class BufferCore {
 public:
  ~BufferCore();
  BufferCore(const BufferCore&) = delete;
  BufferCore& operator=(const BufferCore&) = delete;

  uint64_t id() const { return id_; }
  uint64_t size() const { return len_; }
  mem::Store* store() const { return store_; }
  Backing backing() const;
  bool immutable() const;
  mem::AccountId reader() const { return reader_; }
  mem::RegionId region() const { return region_; }
  mem::Pin pin(uint64_t offset, uint64_t len) const;

  // Fresh anonymous region of `len` bytes owned by the core.
  static std::shared_ptr<BufferCore> anonymous(const MemoryContext& ctx, uint64_t len);
  // Read-only view over mapped segment bytes.
  static std::shared_ptr<BufferCore> mapped(mem::Store* store, mem::SegRef ref, mem::AccountId reader,
                                            std::vector<std::shared_ptr<mem::SegmentView>> views);
  // Record that the region range now lives in a segment.
  void mark_deanonymized(const mem::SegRef& ref);

 private:
  BufferCore() = default;
  uint64_t id_ = 0;
  uint64_t len_ = 0;
  mem::Store* store_ = nullptr;
  mem::AccountId reader_ = mem::kRootAccount;
  mem::RegionId region_ = 0;  // 0: none owned
  mutable std::mutex mu_;
  BackingKind kind_ = BackingKind::Anonymous;
  mem::SegRef seg_;
  std::vector<std::shared_ptr<mem::SegmentView>> views_;
};

class BufferPin {
 public:
  BufferPin() = default;
  BufferPin(mem::Pin pin) : pin_(std::move(pin)) {}
  const std::byte* data() const { return pin_.data(); }
  uint64_t size() const { return pin_.size(); }
  std::span<const std::byte> bytes() const { return pin_.bytes(); }
  template <typename T>
  const T* as() const {
    return reinterpret_cast<const T*>(pin_.data());
  }

 private:
  mem::Pin pin_;
};

// A byte window over a core. Default-constructed means absent.
class Buffer {
 public:
  Buffer() = default;
  Buffer(std::shared_ptr<BufferCore> core, uint64_t offset, uint64_t len);

  explicit operator bool() const { return core_ != nullptr; }
  uint64_t id() const { return core_ ? core_->id() : 0; }
  uint64_t size() const { return len_; }
  uint64_t offset() const { return offset_; }
  Backing backing() const;
  const std::shared_ptr<BufferCore>& core() const { return core_; }
  Buffer view(uint64_t offset, uint64_t len) const;
  BufferPin pin() const;
  std::vector<std::byte> copy_bytes() const;

 private:
  std::shared_ptr<BufferCore> core_;
  uint64_t offset_ = 0;
  uint64_t len_ = 0;
};

// An anonymous buffer under construction; writable until sealed.
class WritableBuffer {
 public:
  WritableBuffer() = default;
  WritableBuffer(const MemoryContext& ctx, uint64_t len);
  std::byte* data() { return data_; }
  template <typename T>
  T* as() {
    return reinterpret_cast<T*>(data_);
  }
  uint64_t size() const { return len_; }
  // Absent buffer when len is 0.
  Buffer seal();

 private:
  std::shared_ptr<BufferCore> core_;
  mem::Pin pin_;
  std::byte* data_ = nullptr;
  uint64_t len_ = 0;
};

Buffer make_buffer(const MemoryContext& ctx, std::span<const std::byte> bytes);

}  // namespace zsim::col
