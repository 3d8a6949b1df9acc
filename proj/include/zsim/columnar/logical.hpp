#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "zsim/columnar/array.hpp"

namespace zsim::col {

// Null is monostate.
using Value = std::variant<std::monostate, int64_t, double, std::string, bool>;

std::string to_string(const Value& v);
// Exact equality; doubles compare bitwise except that NaN == NaN.
bool value_equal(const Value& a, const Value& b);

std::vector<Value> array_values(const Array& a);
std::vector<Value> column_values(const Table& t, size_t col);
std::vector<std::vector<Value>> table_columns(const Table& t);
bool tables_equal(const Table& a, const Table& b);

}  // namespace zsim::col
