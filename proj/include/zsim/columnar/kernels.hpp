#pragma once

#include <string>
#include <variant>
#include <vector>

#include "zsim/columnar/array.hpp"

namespace zsim::col {

struct Upper {
  std::string column;
};

// Row-major matrix applied to the numeric columns in schema order.
struct MatMul {
  uint64_t rows = 0;
  uint64_t cols = 0;
  std::vector<double> values;
};

// Even global rows train, odd rows are predicted.
struct Ols {
  std::vector<std::string> features;
  std::string label;
  std::string output = "prediction";
};

struct SumAll {};

using KernelKind = std::variant<Upper, MatMul, Ols, SumAll>;

struct Scalar {
  int64_t int_sum = 0;
  double float_sum = 0;
  bool operator==(const Scalar&) const = default;
};

using KernelResult = std::variant<Table, Scalar>;

KernelResult kernel(const MemoryContext& ctx, const Table& t, const KernelKind& kind);

// Upper-case mapping used by Upper: ASCII, Latin-1 lowercase, and sharp s to
// capital sharp s (2 -> 3 bytes). Other code points are unchanged.
std::string utf8_upper(std::string_view s);

}  // namespace zsim::col
