#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "zsim/columnar/kernels.hpp"
#include "zsim/columnar/logical.hpp"
#include "zsim/columnar/ops.hpp"

// Naive row-at-a-time implementations used as oracles for the columnar
// kernels. Nothing here touches buffers or the store.
namespace zsim::ref {

using col::DType;
using col::Value;

struct RefField {
  std::string name;
  DType type = DType::Int64;
};

struct RowTable {
  std::vector<RefField> fields;
  std::vector<std::vector<Value>> rows;

  size_t index_of(const std::string& name) const;
};

RowTable from_table(const col::Table& t);
// Dictionary-encoded columns compare by decoded value. Float cells use a
// relative tolerance (0 means exact bit equality).
bool equal(const RowTable& expected, const col::Table& actual, double float_rel_tol, std::string* why = nullptr);

RowTable slice(const RowTable& t, uint64_t start, uint64_t len);
RowTable project(const RowTable& t, const std::vector<std::string>& names);
RowTable concat_vertical(const RowTable& a, const RowTable& b);
RowTable concat_horizontal(const RowTable& a, const RowTable& b);
RowTable add_columns(const RowTable& t, const std::vector<col::Expr>& exprs);
RowTable filter(const RowTable& t, const std::vector<bool>& keep);
RowTable sort(const RowTable& t, const std::string& col, bool ascending);
RowTable upper(const RowTable& t, const std::string& col);
RowTable matmul(const RowTable& t, const col::MatMul& m);
RowTable ols(const RowTable& t, const col::Ols& o);
col::Scalar sum_all(const RowTable& t);

struct RefDict {
  std::vector<std::string> dictionary;
  std::vector<int32_t> codes;
};
RefDict dict_encode(const std::vector<Value>& column);

std::string upper_utf8(const std::string& s);

}  // namespace zsim::ref
