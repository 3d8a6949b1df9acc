#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "zsim/columnar/kernels.hpp"
#include "zsim/columnar/ops.hpp"

namespace zsim::rm {

struct LoaderCode {
  std::string path;
  std::set<std::string> dict_columns;
  unsigned threads = 0;  // 0: engine default
};

struct OpProject {
  std::vector<std::string> names;
};
struct OpDrop {
  std::vector<std::string> names;
};
// Rows [floor(n*start), floor(n*(start+len))).
struct OpSlice {
  double start = 0;
  double len = 1;
};
// Concatenates the inputs in parent order.
struct OpConcat {
  col::Axis axis = col::Axis::Vertical;
};
struct OpAddColumns {
  std::vector<col::Expr> exprs;
  bool materialize_all = false;
};
// Keeps each row with probability `keep`, drawn from `seed`.
struct OpFilter {
  uint64_t seed = 0;
  double keep = 0.5;
};
struct OpSort {
  std::string column;
  bool ascending = true;
};
struct OpKernel {
  col::KernelKind kind;
};

using ComputeOp = std::variant<OpProject, OpDrop, OpSlice, OpConcat, OpAddColumns, OpFilter, OpSort, OpKernel>;
using NodeCode = std::variant<LoaderCode, ComputeOp>;

struct NodeSpec {
  uint32_t id = 0;
  NodeCode code;
  std::vector<uint32_t> parents;  // input order; repeats allowed
  uint64_t mem_estimate = 1;
  uint32_t depth = 0;  // filled by finalize
  bool is_loader() const { return std::holds_alternative<LoaderCode>(code); }
};

struct DagSpec {
  std::string name;
  std::vector<NodeSpec> nodes;
  // Index into nodes for a node id; throws InvalidDag.
  size_t index_of(uint32_t id) const;
};

// Checks structure and fills depths. Throws InvalidDag.
void finalize(DagSpec& dag);
// Node indices, parents before children.
std::vector<size_t> topo_order(const DagSpec& dag);

std::vector<bool> filter_mask(uint64_t seed, double keep, uint64_t n);
// Runs a compute op over its inputs. SumAll yields a one-row table.
col::Table apply(const ComputeOp& op, const std::vector<col::Table>& inputs, const col::MemoryContext& ctx);
std::string describe(const NodeCode& code);

}  // namespace zsim::rm
