#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "zsim/columnar/buffer.hpp"
#include "zsim/columnar/types.hpp"

namespace zsim::col {

struct Array;
using ArrayPtr = std::shared_ptr<const Array>;

struct DictData {
  uint64_t dict_id = 0;
  ArrayPtr dictionary;  // plain Utf8 without nulls
  Buffer codes;         // i32 per logical row
};

// Validity is present iff null_count > 0. Bitmaps (validity and Bool values)
// are LSB-first and relative to the logical window. Utf8 offsets are i64 and
// absolute into `values`; row i spans offsets[slice_offset + i, +1].
struct Array {
  DType dtype = DType::Int64;
  uint64_t length = 0;
  uint64_t null_count = 0;
  Buffer validity;
  Buffer offsets;
  Buffer values;
  uint64_t slice_offset = 0;
  std::optional<DictData> dict;

  bool is_dict() const { return dict.has_value(); }
  // Buffers in serialization order: validity, offsets, values, codes.
  std::vector<const Buffer*> buffers() const;
  // Throws Internal on structural violations.
  void validate() const;
};

uint64_t next_dict_id();

struct RecordBatch {
  uint64_t nrows = 0;
  std::vector<ArrayPtr> columns;
};

struct Table {
  Schema schema;
  std::vector<RecordBatch> batches;

  uint64_t nrows() const;
  size_t ncols() const { return schema.size(); }
  // All chunks of one column.
  std::vector<ArrayPtr> column(size_t i) const;
  std::vector<ArrayPtr> column(std::string_view name) const { return column(schema.index_of(name)); }
  void validate() const;
};

struct Mask {
  Buffer bits;
  uint64_t length = 0;
};

inline bool bit_at(const std::byte* bits, uint64_t i) { return (uint8_t(bits[i >> 3]) >> (i & 7)) & 1; }
inline void set_bit(std::byte* bits, uint64_t i, bool v) {
  auto m = std::byte(uint8_t(1u << (i & 7)));
  if (v) bits[i >> 3] |= m;
  else bits[i >> 3] &= ~m;
}
inline uint64_t bitmap_bytes(uint64_t n) { return (n + 7) / 8; }

// Pins an array's buffers and exposes typed row access.
class ArrayReader {
 public:
  explicit ArrayReader(const Array& a);
  const Array& array() const { return *a_; }
  uint64_t length() const { return a_->length; }
  bool is_null(uint64_t i) const { return has_validity_ && !bit_at(validity_.data(), i); }
  int64_t i64(uint64_t i) const { return values_.as<int64_t>()[i]; }
  double f64(uint64_t i) const { return values_.as<double>()[i]; }
  bool boolean(uint64_t i) const { return bit_at(values_.data(), i); }
  int32_t code(uint64_t i) const { return codes_.as<int32_t>()[i]; }
  std::string_view str(uint64_t i) const;
  // Numeric value as double (Int64 converted).
  double number(uint64_t i) const { return a_->dtype == DType::Int64 ? double(i64(i)) : f64(i); }
  const int64_t* offsets() const { return offsets_.as<int64_t>() + a_->slice_offset; }
  const std::byte* value_bytes() const { return values_.data(); }
  const ArrayReader* dictionary() const { return dict_.get(); }

 private:
  const Array* a_;
  bool has_validity_ = false;
  BufferPin validity_, offsets_, values_, codes_;
  std::unique_ptr<ArrayReader> dict_;
};

}  // namespace zsim::col
