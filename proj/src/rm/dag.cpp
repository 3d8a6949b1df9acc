#include "zsim/rm/dag.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>

#include "zsim/columnar/build.hpp"
#include "zsim/util/error.hpp"
#include "zsim/util/rng.hpp"

namespace zsim::rm {

size_t DagSpec::index_of(uint32_t id) const {
  for (size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].id == id) return i;
  fail(ErrorCode::InvalidDag, fmt::format("dag '{}' has no node {}", name, id));
}

std::vector<size_t> topo_order(const DagSpec& dag) {
  size_t n = dag.nodes.size();
  std::vector<int> state(n, 0);  // 0 new, 1 on stack, 2 done
  std::vector<size_t> order;
  // Iterative DFS so deep chains cannot overflow the stack.
  for (size_t root = 0; root < n; ++root) {
    if (state[root]) continue;
    std::vector<std::pair<size_t, size_t>> stack{{root, 0}};
    state[root] = 1;
    while (!stack.empty()) {
      auto& [v, next] = stack.back();
      auto& parents = dag.nodes[v].parents;
      if (next < parents.size()) {
        size_t p = dag.index_of(parents[next++]);
        if (state[p] == 1) fail(ErrorCode::InvalidDag, fmt::format("dag '{}' has a cycle", dag.name));
        if (state[p] == 0) {
          state[p] = 1;
          stack.emplace_back(p, 0);
        }
        continue;
      }
      state[v] = 2;
      order.push_back(v);
      stack.pop_back();
    }
  }
  return order;
}

void finalize(DagSpec& dag) {
  std::set<uint32_t> ids;
  for (auto& n : dag.nodes) {
    if (!ids.insert(n.id).second) fail(ErrorCode::InvalidDag, fmt::format("duplicate node id {}", n.id));
    if (n.mem_estimate == 0) fail(ErrorCode::InvalidDag, fmt::format("node {} has zero memory estimate", n.id));
    if (n.is_loader() && !n.parents.empty()) fail(ErrorCode::InvalidDag, fmt::format("loader {} has parents", n.id));
    if (!n.is_loader() && n.parents.empty())
      fail(ErrorCode::InvalidDag, fmt::format("compute node {} has no parents", n.id));
  }
  for (auto i : topo_order(dag)) {
    auto& n = dag.nodes[i];
    n.depth = 0;
    for (auto p : n.parents) n.depth = std::max(n.depth, dag.nodes[dag.index_of(p)].depth + 1);
  }
}

std::vector<bool> filter_mask(uint64_t seed, double keep, uint64_t n) {
  Rng rng(seed);
  std::vector<bool> m(n);
  for (uint64_t i = 0; i < n; ++i) m[i] = rng.chance(keep);
  return m;
}

namespace {

struct Apply {
  const std::vector<col::Table>& in;
  const col::MemoryContext& ctx;

  const col::Table& first() const {
    if (in.empty()) fail(ErrorCode::InvalidArgument, "operation needs an input");
    return in[0];
  }
  col::Table operator()(const OpProject& o) const { return col::project(first(), o.names); }
  col::Table operator()(const OpDrop& o) const {
    std::vector<std::string> keep;
    for (auto& f : first().schema.fields)
      if (std::find(o.names.begin(), o.names.end(), f.name) == o.names.end()) keep.push_back(f.name);
    for (auto& name : o.names) first().schema.index_of(name);
    return col::project(first(), keep);
  }
  col::Table operator()(const OpSlice& o) const {
    uint64_t n = first().nrows();
    uint64_t s = std::min<uint64_t>(n, uint64_t(std::floor(double(n) * o.start)));
    uint64_t e = std::min<uint64_t>(n, uint64_t(std::floor(double(n) * (o.start + o.len))));
    return col::slice_table(ctx, first(), s, e - s);
  }
  col::Table operator()(const OpConcat& o) const { return col::concat(ctx, in, o.axis); }
  col::Table operator()(const OpAddColumns& o) const {
    return col::add_columns(ctx, first(), o.exprs, o.materialize_all);
  }
  col::Table operator()(const OpFilter& o) const {
    auto& t = first();
    return col::filter(ctx, t, col::make_mask(ctx, filter_mask(o.seed, o.keep, t.nrows())));
  }
  col::Table operator()(const OpSort& o) const { return col::sort_by(ctx, first(), o.column, o.ascending); }
  col::Table operator()(const OpKernel& o) const {
    auto r = col::kernel(ctx, first(), o.kind);
    if (auto t = std::get_if<col::Table>(&r)) return std::move(*t);
    auto s = std::get<col::Scalar>(r);
    std::vector<int64_t> i{s.int_sum};
    std::vector<double> d{s.float_sum};
    return col::make_table({{"int_sum", col::make_int64(ctx, i)}, {"float_sum", col::make_float64(ctx, d)}});
  }
};

std::string_view kernel_name(const col::KernelKind& k) {
  switch (k.index()) {
    case 0: return "upper";
    case 1: return "matmul";
    case 2: return "ols";
    default: return "sum_all";
  }
}

}  // namespace

col::Table apply(const ComputeOp& op, const std::vector<col::Table>& inputs, const col::MemoryContext& ctx) {
  return std::visit(Apply{inputs, ctx}, op);
}

std::string describe(const NodeCode& code) {
  if (auto l = std::get_if<LoaderCode>(&code)) return fmt::format("load({})", l->path);
  static const char* names[] = {"project", "drop", "slice", "concat", "add_columns", "filter", "sort", "kernel"};
  auto& op = std::get<ComputeOp>(code);
  if (auto k = std::get_if<OpKernel>(&op)) return std::string(kernel_name(k->kind));
  return names[op.index()];
}

}  // namespace zsim::rm
