#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>

namespace zsim::mem {

// Page-size records indexed by swap slot.
class SwapDevice {
 public:
  virtual ~SwapDevice() = default;
  virtual void write(uint64_t slot, const std::byte* page) = 0;
  virtual void read(uint64_t slot, std::byte* page) = 0;
  virtual void discard(uint64_t slot) = 0;
};

std::unique_ptr<SwapDevice> make_memory_swap(uint64_t page_size);
// Flat spill file; truncated on open and removed on destruction.
std::unique_ptr<SwapDevice> make_file_swap(const std::string& path, uint64_t page_size);

}  // namespace zsim::mem
