#include "zsim/memstore/swap_device.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <unordered_map>
#include <vector>

#include <fmt/format.h>

#include "zsim/util/error.hpp"

namespace zsim::mem {
namespace {

class MemorySwap final : public SwapDevice {
 public:
  explicit MemorySwap(uint64_t ps) : ps_(ps) {}
  void write(uint64_t slot, const std::byte* page) override {
    auto& rec = slots_[slot];
    rec.assign(page, page + ps_);
  }
  void read(uint64_t slot, std::byte* page) override {
    auto it = slots_.find(slot);
    if (it == slots_.end()) fail(ErrorCode::Internal, fmt::format("read of empty swap slot {}", slot));
    std::memcpy(page, it->second.data(), ps_);
  }
  void discard(uint64_t slot) override { slots_.erase(slot); }

 private:
  uint64_t ps_;
  std::unordered_map<uint64_t, std::vector<std::byte>> slots_;
};

class FileSwap final : public SwapDevice {
 public:
  FileSwap(std::string path, uint64_t ps) : path_(std::move(path)), ps_(ps) {
    fd_ = ::open(path_.c_str(), O_RDWR | O_CREAT | O_TRUNC, 0600);
    if (fd_ < 0) fail(ErrorCode::IoError, fmt::format("open {}: {}", path_, std::strerror(errno)));
  }
  ~FileSwap() override {
    ::close(fd_);
    ::unlink(path_.c_str());
  }
  void write(uint64_t slot, const std::byte* page) override {
    if (::pwrite(fd_, page, ps_, off_t(slot * ps_)) != ssize_t(ps_))
      fail(ErrorCode::IoError, fmt::format("swap write slot {}: {}", slot, std::strerror(errno)));
  }
  void read(uint64_t slot, std::byte* page) override {
    if (::pread(fd_, page, ps_, off_t(slot * ps_)) != ssize_t(ps_))
      fail(ErrorCode::IoError, fmt::format("swap read slot {}: {}", slot, std::strerror(errno)));
  }
  void discard(uint64_t) override {}

 private:
  std::string path_;
  uint64_t ps_;
  int fd_ = -1;
};

}  // namespace

std::unique_ptr<SwapDevice> make_memory_swap(uint64_t page_size) {
  return std::make_unique<MemorySwap>(page_size);
}

std::unique_ptr<SwapDevice> make_file_swap(const std::string& path, uint64_t page_size) {
  return std::make_unique<FileSwap>(path, page_size);
}

}  // namespace zsim::mem
