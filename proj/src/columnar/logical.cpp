#include "zsim/columnar/logical.hpp"

#include <cmath>
#include <cstring>

#include <fmt/format.h>

namespace zsim::col {

std::string to_string(const Value& v) {
  struct V {
    std::string operator()(std::monostate) const { return "null"; }
    std::string operator()(int64_t x) const { return fmt::format("{}", x); }
    std::string operator()(double x) const { return fmt::format("{}", x); }
    std::string operator()(const std::string& s) const { return fmt::format("\"{}\"", s); }
    std::string operator()(bool b) const { return b ? "true" : "false"; }
  };
  return std::visit(V{}, v);
}

bool value_equal(const Value& a, const Value& b) {
  if (a.index() != b.index()) return false;
  if (auto x = std::get_if<double>(&a)) {
    double y = std::get<double>(b);
    if (std::isnan(*x) && std::isnan(y)) return true;
    return std::memcmp(x, &y, sizeof y) == 0;
  }
  return a == b;
}

std::vector<Value> array_values(const Array& a) {
  ArrayReader r(a);
  std::vector<Value> out;
  out.reserve(a.length);
  for (uint64_t i = 0; i < a.length; ++i) {
    if (r.is_null(i)) {
      out.emplace_back(std::monostate{});
      continue;
    }
    switch (a.dtype) {
      case DType::Int64: out.emplace_back(r.i64(i)); break;
      case DType::Float64: out.emplace_back(r.f64(i)); break;
      case DType::Utf8: out.emplace_back(std::string(r.str(i))); break;
      case DType::Bool: out.emplace_back(r.boolean(i)); break;
    }
  }
  return out;
}

std::vector<Value> column_values(const Table& t, size_t col) {
  std::vector<Value> out;
  for (auto& b : t.batches) {
    auto v = array_values(*b.columns.at(col));
    out.insert(out.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));
  }
  return out;
}

std::vector<std::vector<Value>> table_columns(const Table& t) {
  std::vector<std::vector<Value>> out;
  for (size_t c = 0; c < t.ncols(); ++c) out.push_back(column_values(t, c));
  return out;
}

bool tables_equal(const Table& a, const Table& b) {
  if (!a.schema.compatible(b.schema) || a.nrows() != b.nrows()) return false;
  for (size_t c = 0; c < a.ncols(); ++c) {
    auto x = column_values(a, c), y = column_values(b, c);
    for (size_t i = 0; i < x.size(); ++i)
      if (!value_equal(x[i], y[i])) return false;
  }
  return true;
}

}  // namespace zsim::col
