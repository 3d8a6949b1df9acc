#include "zsim/columnar/types.hpp"

#include <fmt/format.h>

#include "zsim/util/error.hpp"

namespace zsim::col {

std::string_view to_string(DType t) {
  switch (t) {
    case DType::Int64: return "int64";
    case DType::Float64: return "float64";
    case DType::Utf8: return "utf8";
    case DType::Bool: return "bool";
  }
  return "?";
}

size_t Schema::index_of(std::string_view name) const {
  for (size_t i = 0; i < fields.size(); ++i)
    if (fields[i].name == name) return i;
  fail(ErrorCode::UnknownColumn, fmt::format("no column named '{}'", name));
}

bool Schema::contains(std::string_view name) const {
  for (auto& f : fields)
    if (f.name == name) return true;
  return false;
}

bool Schema::compatible(const Schema& o) const {
  if (fields.size() != o.fields.size()) return false;
  for (size_t i = 0; i < fields.size(); ++i) {
    auto &a = fields[i], &b = o.fields[i];
    if (a.name != b.name || a.type != b.type || a.dict != b.dict) return false;
  }
  return true;
}

}  // namespace zsim::col
