#pragma once

#include <string>
#include <vector>

#include "zsim/columnar/array.hpp"

namespace zsim::col {

Table slice_table(const MemoryContext& ctx, const Table& t, uint64_t start, uint64_t len);
Table project(const Table& t, const std::vector<std::string>& names);

enum class Axis { Vertical, Horizontal };
Table concat(const MemoryContext& ctx, const std::vector<Table>& ts, Axis axis);

enum class BinOp : uint8_t { Add, Sub, Mul };

// name = lhs op rhs over numeric columns. Later expressions may use earlier ones.
struct Expr {
  std::string name;
  std::string lhs;
  BinOp op = BinOp::Add;
  std::string rhs;
};

Table add_columns(const MemoryContext& ctx, const Table& t, const std::vector<Expr>& exprs, bool materialize_all);
Table filter(const MemoryContext& ctx, const Table& t, const Mask& m);
// Stable; nulls sort last in both directions.
Table sort_by(const MemoryContext& ctx, const Table& t, const std::string& col, bool ascending);
// Every buffer rebuilt as fresh anonymous memory.
Table materialize(const MemoryContext& ctx, const Table& t);

// Gather `rows` (absolute within the batch) from one array.
ArrayPtr take(const MemoryContext& ctx, const Array& a, const std::vector<uint64_t>& rows);

}  // namespace zsim::col
