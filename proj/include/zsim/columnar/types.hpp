#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace zsim::col {

enum class DType : uint8_t { Int64 = 0, Float64 = 1, Utf8 = 2, Bool = 3 };

std::string_view to_string(DType t);
inline bool is_numeric(DType t) { return t == DType::Int64 || t == DType::Float64; }
// Bytes per value; 0 for Utf8, and Bool packs 8 values per byte.
inline uint64_t fixed_width(DType t) { return t == DType::Int64 || t == DType::Float64 ? 8 : 0; }

struct Field {
  std::string name;
  DType type = DType::Int64;
  bool dict = false;
  bool nullable = false;
  bool operator==(const Field&) const = default;
};

struct Schema {
  std::vector<Field> fields;

  size_t size() const { return fields.size(); }
  // Throws UnknownColumn.
  size_t index_of(std::string_view name) const;
  bool contains(std::string_view name) const;
  // Names, types and dict flags agree; nullability is ignored.
  bool compatible(const Schema& o) const;
  bool operator==(const Schema&) const = default;
};

}  // namespace zsim::col
