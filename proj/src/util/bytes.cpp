#include "zsim/util/bytes.hpp"

#include "zsim/util/error.hpp"

#include <fmt/format.h>

namespace zsim {

ByteReader::ByteReader(std::span<const std::byte> in, int error_code) : in_(in), code_(error_code) {}

void ByteReader::need(uint64_t n) const {
  if (n > in_.size() - pos_)
    fail(static_cast<ErrorCode>(code_),
         fmt::format("truncated input: need {} bytes at offset {}, have {}", n, pos_, in_.size() - pos_));
}

uint8_t ByteReader::u8() {
  need(1);
  return uint8_t(in_[pos_++]);
}

uint16_t ByteReader::u16() {
  need(2);
  uint16_t v = uint16_t(uint8_t(in_[pos_])) | uint16_t(uint8_t(in_[pos_ + 1])) << 8;
  pos_ += 2;
  return v;
}

uint32_t ByteReader::u32() {
  need(4);
  uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | uint8_t(in_[pos_ + i]);
  pos_ += 4;
  return v;
}

uint64_t ByteReader::u64() {
  need(8);
  uint64_t v = load_u64le(in_.data() + pos_);
  pos_ += 8;
  return v;
}

double ByteReader::f64() {
  uint64_t bits = u64();
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

uint64_t ByteReader::varint() {
  uint64_t v = 0;
  for (int shift = 0; shift < 64; shift += 7) {
    uint8_t b = u8();
    v |= uint64_t(b & 0x7f) << shift;
    if (!(b & 0x80)) return v;
  }
  fail(static_cast<ErrorCode>(code_), "varint too long");
}

std::span<const std::byte> ByteReader::bytes(uint64_t n) {
  need(n);
  auto s = in_.subspan(pos_, n);
  pos_ += n;
  return s;
}

std::string ByteReader::str(uint64_t n) {
  auto s = bytes(n);
  return std::string(reinterpret_cast<const char*>(s.data()), s.size());
}

void ByteReader::align(size_t a) {
  size_t target = align_up(pos_, a);
  need(target - pos_);
  pos_ = target;
}

}  // namespace zsim
