#include "zsim/columnar/array.hpp"

#include <atomic>

#include <fmt/format.h>

#include "zsim/util/error.hpp"

namespace zsim::col {

namespace {
std::atomic<uint64_t> g_next_dict_id{1};

void check(bool ok, const std::string& what) {
  if (!ok) fail(ErrorCode::Internal, "invalid array: " + what);
}
}  // namespace

uint64_t next_dict_id() { return g_next_dict_id++; }

std::vector<const Buffer*> Array::buffers() const {
  std::vector<const Buffer*> out;
  if (validity) out.push_back(&validity);
  if (offsets) out.push_back(&offsets);
  if (values) out.push_back(&values);
  if (dict && dict->codes) out.push_back(&dict->codes);
  return out;
}

void Array::validate() const {
  check(null_count <= length, "null_count exceeds length");
  check(bool(validity) == (null_count > 0), "validity present iff nulls");
  if (validity) {
    check(validity.size() >= bitmap_bytes(length), "validity too short");
    auto p = validity.pin();
    uint64_t zeros = 0;
    for (uint64_t i = 0; i < length; ++i) zeros += !bit_at(p.data(), i);
    check(zeros == null_count, fmt::format("null_count {} but {} zero bits", null_count, zeros));
  }
  if (dict) {
    check(dtype == DType::Utf8, "dictionary on non-Utf8");
    check(dict->dictionary && !dict->dictionary->is_dict(), "dictionary must be plain");
    check(!offsets && !values, "dict array carries plain buffers");
    check(length == 0 || dict->codes.size() >= length * 4, "codes too short");
    if (length) {
      auto p = dict->codes.pin();
      auto codes = p.as<int32_t>();
      for (uint64_t i = 0; i < length; ++i)
        check(codes[i] >= 0 && uint64_t(codes[i]) < std::max<uint64_t>(dict->dictionary->length, 1),
              fmt::format("code {} out of range", codes[i]));
    }
    return;
  }
  switch (dtype) {
    case DType::Int64:
    case DType::Float64:
      check(length == 0 || values.size() >= length * 8, "values too short");
      check(slice_offset == 0, "slice_offset on fixed-width array");
      break;
    case DType::Bool:
      check(length == 0 || values.size() >= bitmap_bytes(length), "bool values too short");
      check(slice_offset == 0, "slice_offset on bool array");
      break;
    case DType::Utf8: {
      check(bool(offsets), "Utf8 without offsets");
      check(offsets.size() >= (slice_offset + length + 1) * 8, "offsets too short");
      auto p = offsets.pin();
      auto o = p.as<int64_t>();
      for (uint64_t i = slice_offset; i < slice_offset + length; ++i) check(o[i] <= o[i + 1], "offsets decrease");
      check(o[slice_offset] >= 0 && uint64_t(o[slice_offset + length]) <= values.size(), "offsets beyond values");
      break;
    }
  }
}

uint64_t Table::nrows() const {
  uint64_t n = 0;
  for (auto& b : batches) n += b.nrows;
  return n;
}

std::vector<ArrayPtr> Table::column(size_t i) const {
  std::vector<ArrayPtr> out;
  for (auto& b : batches) out.push_back(b.columns.at(i));
  return out;
}

void Table::validate() const {
  for (auto& b : batches) {
    check(b.columns.size() == schema.size(), "batch arity differs from schema");
    for (size_t c = 0; c < b.columns.size(); ++c) {
      auto& a = *b.columns[c];
      check(a.length == b.nrows, "column length differs from batch rows");
      check(a.dtype == schema.fields[c].type, "column type differs from schema");
      check(a.is_dict() == schema.fields[c].dict, "dict flag differs from schema");
      a.validate();
    }
  }
}

ArrayReader::ArrayReader(const Array& a) : a_(&a) {
  has_validity_ = bool(a.validity);
  validity_ = a.validity.pin();
  if (a.dict) {
    codes_ = a.dict->codes.pin();
    dict_ = std::make_unique<ArrayReader>(*a.dict->dictionary);
  } else {
    offsets_ = a.offsets.pin();
    values_ = a.values.pin();
  }
}

std::string_view ArrayReader::str(uint64_t i) const {
  if (dict_) return dict_->str(uint64_t(code(i)));
  auto o = offsets();
  return std::string_view(reinterpret_cast<const char*>(values_.data()) + o[i], size_t(o[i + 1] - o[i]));
}

}  // namespace zsim::col
