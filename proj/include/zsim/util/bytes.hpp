#pragma once

#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace zsim {

// Little-endian append-only encoder.
class ByteWriter {
 public:
  void u8(uint8_t v) { out_.push_back(std::byte{v}); }
  void u16(uint16_t v) { put_le(v); }
  void u32(uint32_t v) { put_le(v); }
  void u64(uint64_t v) { put_le(v); }
  void i64(int64_t v) { put_le(static_cast<uint64_t>(v)); }
  void f64(double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_le(bits);
  }
  void bytes(std::span<const std::byte> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  void str(std::string_view s) {
    auto p = reinterpret_cast<const std::byte*>(s.data());
    out_.insert(out_.end(), p, p + s.size());
  }
  void varint(uint64_t v) {
    while (v >= 0x80) {
      u8(static_cast<uint8_t>(v | 0x80));
      v >>= 7;
    }
    u8(static_cast<uint8_t>(v));
  }
  void pad_to(size_t align) {
    while (out_.size() % align) out_.push_back(std::byte{0});
  }
  // Overwrite a u32 previously reserved at `pos`.
  void patch_u32(size_t pos, uint32_t v) {
    for (int i = 0; i < 4; ++i) out_[pos + i] = std::byte(uint8_t(v >> (8 * i)));
  }
  size_t size() const { return out_.size(); }
  std::vector<std::byte>& buffer() { return out_; }
  std::vector<std::byte> take() { return std::move(out_); }

 private:
  template <typename T>
  void put_le(T v) {
    for (size_t i = 0; i < sizeof(T); ++i) out_.push_back(std::byte(uint8_t(v >> (8 * i))));
  }
  std::vector<std::byte> out_;
};

// Bounds-checked little-endian decoder. Throws Error(code) on truncation.
class ByteReader {
 public:
  ByteReader(std::span<const std::byte> in, int error_code);
  uint8_t u8();
  uint16_t u16();
  uint32_t u32();
  uint64_t u64();
  int64_t i64() { return static_cast<int64_t>(u64()); }
  double f64();
  uint64_t varint();
  std::span<const std::byte> bytes(uint64_t n);
  std::string str(uint64_t n);
  void skip(uint64_t n) { bytes(n); }
  void align(size_t a);
  size_t pos() const { return pos_; }
  size_t remaining() const { return in_.size() - pos_; }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(uint64_t n) const;
  std::span<const std::byte> in_;
  size_t pos_ = 0;
  int code_;
};

inline uint64_t load_u64le(const std::byte* p) {
  uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | uint64_t(p[i]);
  return v;
}

inline uint64_t align_up(uint64_t v, uint64_t a) { return (v + a - 1) / a * a; }
inline uint64_t ceil_div(uint64_t v, uint64_t a) { return (v + a - 1) / a; }

}  // namespace zsim
