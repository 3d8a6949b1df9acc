#include "zsim/bench/workloads.hpp"

#include <cmath>
#include <filesystem>

#include <fmt/format.h>

#include "zsim/util/error.hpp"
#include "zsim/util/rng.hpp"

namespace zsim::bench {

namespace fs = std::filesystem;

namespace {

constexpr double kGiB = double(1ull << 30);

const std::vector<std::pair<Kind, std::string_view>> kKinds = {
    {Kind::CopyAvoidance, "copy"}, {Kind::SameInput, "same_input"}, {Kind::ReshareSuite, "reshare"},
    {Kind::Chain, "chain"},        {Kind::Branchout, "branchout"},  {Kind::Mix, "mix"},
    {Kind::ThreadSweep, "threads"},
};

rm::NodeSpec loader(uint32_t id, const std::string& path, uint64_t out_bytes, std::set<std::string> dict = {},
                    unsigned threads = 0) {
  rm::NodeSpec n;
  n.id = id;
  n.code = rm::LoaderCode{path, std::move(dict), threads};
  n.mem_estimate = out_bytes + out_bytes / 2;
  return n;
}

rm::NodeSpec compute(uint32_t id, rm::ComputeOp op, std::vector<uint32_t> parents, uint64_t in_bytes,
                     uint64_t out_bytes) {
  rm::NodeSpec n;
  n.id = id;
  n.code = std::move(op);
  n.parents = std::move(parents);
  n.mem_estimate = std::max<uint64_t>(1, in_bytes + out_bytes + out_bytes / 2);
  return n;
}

struct Runner {
  const WorkloadSpec& spec;
  const RunConfig& cfg;
  std::string dir;

  engine::EngineConfig engine_config(uint64_t default_limit) const {
    auto e = cfg.engine;
    e.store.mem_limit = cfg.mem_limit.value_or(default_limit);
    if (e.baseline) {
      e.use_decache = false;
      e.policy.policy = rm::Policy::Kswap;
    }
    e.compute_units = spec.compute_units;
    return e;
  }

  std::string variant() const { return cfg.engine.baseline ? "baseline" : "sipc"; }

  nlohmann::ordered_json params(const engine::EngineConfig& e) const {
    nlohmann::ordered_json p;
    p["kind"] = to_string(spec.kind);
    p["variant"] = variant();
    p["policy"] = rm::to_string(e.policy.policy);
    p["trigger"] = rm::to_string(e.policy.trigger);
    p["overcommit_pct"] = e.policy.overcommit_pct;
    p["compute_units"] = spec.compute_units;
    p["scale"] = spec.scale;
    p["parallel"] = spec.parallel;
    p["mem_limit"] = e.store.mem_limit;
    p["seed"] = spec.seed;
    return p;
  }

  BenchRun run(std::string label, std::vector<rm::DagSpec> dags, const engine::EngineConfig& e,
               nlohmann::ordered_json extra = {}) const {
    BenchRun r;
    r.label = std::move(label);
    r.params = params(e);
    for (auto& [k, v] : extra.items()) r.params[k] = v;
    r.report = engine::run_to_completion(std::move(dags), e);
    return r;
  }

  std::string source(GenSpec g) const { return ensure_source(g, dir); }
};

std::vector<BenchRun> copy_avoidance(const Runner& R) {
  auto sz = sizes(R.spec.scale);
  uint64_t rows = sz.table_bytes / 80;
  auto path = R.source(GenSpec{rows, 10, GenType::Int64, 0, 1, false, false, R.spec.seed});
  rm::DagSpec d{"copy", {loader(0, path, rows * 80)}};
  auto e = R.engine_config(sz.mem_limit);
  return {R.run(R.variant(), {d}, e, {{"table_bytes", rows * 80}})};
}

std::vector<BenchRun> same_input(const Runner& R) {
  uint64_t rows = uint64_t(std::llround(2 * kGiB * R.spec.scale / 64));
  uint64_t bytes = rows * 64;
  auto path = R.source(GenSpec{rows, 8, GenType::Int64, 0, 1, false, false, R.spec.seed});
  uint32_t n = R.spec.parallel ? R.spec.parallel : 20;
  std::vector<rm::DagSpec> dags;
  for (uint32_t i = 0; i < n; ++i) {
    rm::DagSpec d{fmt::format("same{}", i), {}};
    d.nodes.push_back(loader(0, path, bytes));
    d.nodes.push_back(compute(1, rm::OpKernel{col::SumAll{}}, {0}, bytes, 16));
    dags.push_back(std::move(d));
  }
  auto e = R.engine_config(3 * bytes);
  return {R.run(R.variant(), std::move(dags), e, {{"table_bytes", bytes}, {"dags", n}})};
}

std::vector<BenchRun> reshare(const Runner& R) {
  auto sz = sizes(R.spec.scale);
  uint64_t rows = std::max<uint64_t>(16, uint64_t(std::llround(1e7 * R.spec.scale)));
  const uint32_t strlen = 32;
  // Ten string columns for the string ops; ten Int64 columns for add_cols.
  auto strings = R.source(GenSpec{rows, 10, GenType::Utf8, strlen, 10, false, true, R.spec.seed});
  auto numbers = R.source(GenSpec{rows, 10, GenType::Int64, 0, 1, false, false, R.spec.seed});
  std::set<std::string> dict;
  for (int c = 0; c < 10; ++c) dict.insert(fmt::format("c{}", c));
  uint64_t tb = rows * 10 * (strlen + 8);
  auto e = R.engine_config(sz.mem_limit);
  std::vector<BenchRun> out;
  for (auto& op : reshare_ops()) {
    if (!R.spec.op.empty() && R.spec.op != op) continue;
    bool dic = op.ends_with("_dic");
    bool numeric = op == "add_cols";
    rm::DagSpec d{fmt::format("reshare_{}", op),
                  {loader(0, numeric ? numbers : strings, tb, dic ? dict : std::set<std::string>{})}};
    std::vector<uint32_t> parents{0};
    rm::ComputeOp cop;
    if (op == "drop_cols") cop = rm::OpDrop{{"c5", "c6", "c7", "c8", "c9"}};
    else if (op == "slice") cop = rm::OpSlice{0.25, 0.5};
    else if (op == "concat") {
      cop = rm::OpConcat{col::Axis::Vertical};
      parents = {0, 0};
    } else if (op == "add_cols")
      cop = rm::OpAddColumns{{{"x1", "c0", col::BinOp::Add, "c1"}, {"x2", "c2", col::BinOp::Mul, "c3"}}, false};
    else if (op == "filter" || op == "filter_dic") cop = rm::OpFilter{R.spec.seed, 0.5};
    else if (op == "sort" || op == "sort_dic") cop = rm::OpSort{"c1", true};
    else cop = rm::OpKernel{col::Upper{"c1"}};
    d.nodes.push_back(compute(1, cop, parents, tb, tb));
    auto r = R.run(fmt::format("{}_{}", R.variant(), op), {d}, e, {{"op", op}, {"rows", rows}});
    uint64_t op_bytes = 0;
    for (auto& n : r.report.nodes)
      if (n.node == 1) op_bytes += n.new_bytes;
    r.params["op_new_bytes"] = op_bytes;
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<std::string> chain_sources(const Runner& R, uint32_t n, uint64_t rows) {
  std::vector<std::string> paths;
  for (uint32_t i = 0; i < n; ++i)
    paths.push_back(R.source(GenSpec{rows, 2, GenType::Int64, 0, 1, false, false, R.spec.seed + i}));
  return paths;
}

std::vector<BenchRun> chain(const Runner& R) {
  auto sz = sizes(R.spec.scale);
  uint32_t n = R.spec.parallel ? R.spec.parallel : 15;
  auto paths = chain_sources(R, n, sz.column_rows);
  std::vector<rm::DagSpec> dags;
  for (uint32_t i = 0; i < n; ++i)
    dags.push_back(chain_dag(fmt::format("chain{}", i), paths[i], sz.column_rows, R.spec.chain_length));
  auto e = R.engine_config(sz.mem_limit);
  return {R.run(R.variant(), std::move(dags), e,
                {{"dags", n}, {"chain_length", R.spec.chain_length}, {"column_bytes", sz.column_rows * 8}})};
}

std::vector<BenchRun> branchout(const Runner& R) {
  auto sz = sizes(R.spec.scale);
  uint32_t n = R.spec.parallel ? R.spec.parallel : 15;
  auto paths = chain_sources(R, n, sz.column_rows);
  std::vector<rm::DagSpec> dags;
  for (uint32_t i = 0; i < n; ++i)
    dags.push_back(branchout_dag(fmt::format("branch{}", i), paths[i], sz.column_rows, 3));
  auto e = R.engine_config(sz.mem_limit);
  return {R.run(R.variant(), std::move(dags), e, {{"dags", n}, {"column_bytes", sz.column_rows * 8}})};
}

std::vector<BenchRun> mix(const Runner& R) {
  auto sz = sizes(R.spec.scale);
  Rng rng(R.spec.seed);
  const uint32_t pool = 14, per_package = 5;
  std::vector<std::string> paths;
  std::vector<uint64_t> pool_rows;
  for (uint32_t i = 0; i < pool; ++i) {
    uint64_t gib = uint64_t(rng.range(1, 4));
    uint64_t rows = std::max<uint64_t>(64, uint64_t(std::llround(double(gib) * kGiB * R.spec.scale / 32)));
    pool_rows.push_back(rows);
    paths.push_back(R.source(GenSpec{rows, 4, GenType::Float64, 0, 1, false, false, R.spec.seed * 31 + i}));
  }
  // Zipf-like source choice so that about half of the DAGs share an input.
  std::vector<double> w(pool);
  double wsum = 0;
  for (uint32_t i = 0; i < pool; ++i) wsum += (w[i] = 1.0 / double(i + 1));

  std::vector<int> packages;
  for (int p = 0; p < 4; ++p)
    for (uint32_t k = 0; k < per_package; ++k) packages.push_back(p);
  for (size_t i = packages.size(); i > 1; --i) std::swap(packages[i - 1], packages[rng.below(i)]);

  const std::vector<std::string> base = {"c0", "c1", "c2", "c3"};
  std::vector<rm::DagSpec> dags;
  for (size_t di = 0; di < packages.size(); ++di) {
    double u = rng.unit() * wsum;
    uint32_t src = 0;
    while (src + 1 < pool && u >= w[src]) u -= w[src++];
    uint64_t rows = pool_rows[src];
    int pkg = packages[di];
    static const char* names[] = {"matmul", "linregr", "append1", "append2"};
    rm::DagSpec d{fmt::format("mix{}_{}", di, names[pkg]), {}};
    d.nodes.push_back(loader(0, paths[src], rows * 32));
    std::vector<std::string> cols = base;
    for (uint32_t j = 1; j < R.spec.chain_length; ++j) {
      uint64_t in = rows * cols.size() * 8;
      if (pkg == 0) {
        uint64_t m = cols.size(), ncols = uint64_t(rng.range(1, 10));
        std::vector<double> vals(m * ncols);
        for (auto& v : vals) v = rng.unit() * 2 - 1;
        d.nodes.push_back(compute(j, rm::OpKernel{col::MatMul{m, ncols, vals}}, {j - 1}, in, rows * ncols * 8));
        cols.clear();
        for (uint64_t k = 0; k < ncols; ++k) cols.push_back(fmt::format("mm{}", k));
      } else if (pkg == 1) {
        std::vector<std::string> pick = base;
        for (size_t i = pick.size(); i > 1; --i) std::swap(pick[i - 1], pick[rng.below(i)]);
        col::Ols o{{pick[0], pick[1]}, pick[2], fmt::format("p{}", j)};
        uint64_t out_rows = rows / 2;
        d.nodes.push_back(compute(j, rm::OpKernel{o}, {j - 1}, in, out_rows * (cols.size() + 1) * 8));
        cols.push_back(o.output);
        rows = out_rows;
      } else {
        std::vector<col::Expr> ex;
        static const col::BinOp ops[] = {col::BinOp::Add, col::BinOp::Sub, col::BinOp::Mul};
        for (int k = 0; k < 4; ++k)
          ex.push_back(col::Expr{fmt::format("x{}_{}", j, k), base[rng.below(4)], ops[rng.below(3)],
                                 base[rng.below(4)]});
        bool mat = pkg == 3;
        uint64_t out = (mat ? cols.size() + 4 : 4) * rows * 8;
        d.nodes.push_back(compute(j, rm::OpAddColumns{ex, mat}, {j - 1}, in, out));
        for (auto& x : ex) cols.push_back(x.name);
      }
    }
    dags.push_back(std::move(d));
  }
  auto e = R.engine_config(sz.mem_limit);
  if (R.spec.parallel) e.workers = R.spec.parallel;
  return {R.run(R.variant(), std::move(dags), e, {{"dags", packages.size()}, {"workers", e.workers}})};
}

std::vector<BenchRun> thread_sweep(const Runner& R) {
  auto sz = sizes(R.spec.scale);
  uint64_t rows = sz.table_bytes / 64;
  auto path = R.source(GenSpec{rows, 8, GenType::Int64, 0, 1, false, false, R.spec.seed});
  uint32_t max_threads = R.spec.parallel ? R.spec.parallel : 8;
  auto e = R.engine_config(sz.mem_limit);
  std::vector<BenchRun> out;
  for (uint32_t t = 1; t <= max_threads; t *= 2) {
    rm::DagSpec d{fmt::format("load_t{}", t), {loader(0, path, rows * 64, {}, t)}};
    out.push_back(R.run(fmt::format("{}_t{}", R.variant(), t), {d}, e, {{"threads", t}}));
  }
  return out;
}

}  // namespace

Kind parse_kind(std::string_view s) {
  for (auto& [k, n] : kKinds)
    if (n == s) return k;
  fail(ErrorCode::UsageError, fmt::format("unknown benchmark kind '{}'", s));
}

std::string_view to_string(Kind k) {
  for (auto& [kk, n] : kKinds)
    if (kk == k) return n;
  return "?";
}

Sizes sizes(double scale) {
  if (!(scale > 0 && scale <= 1)) fail(ErrorCode::UsageError, "scale must be in (0, 1]");
  Sizes s;
  s.column_rows = std::max<uint64_t>(1, uint64_t(std::llround(kGiB * scale / 8)));
  s.table_bytes = uint64_t(std::llround(4 * kGiB * scale));
  s.mem_limit = uint64_t(std::llround(50 * kGiB * scale));
  return s;
}

std::string ensure_source(const GenSpec& g, const std::string& work_dir) {
  fs::create_directories(work_dir);
  auto name = fmt::format("{}_{}x{}_l{}_r{}_{}{}_s{}.pql", to_string(g.dtype), g.rows, g.cols, g.strlen,
                          g.repeat_factor, g.dict_section ? "dict" : "plain", g.sharp_s ? "_ss" : "", g.seed);
  auto path = (fs::path(work_dir) / name).string();
  if (!fs::exists(path)) {
    auto tmp = path + ".tmp";
    gen(g, tmp);
    fs::rename(tmp, path);
  }
  return path;
}

rm::DagSpec chain_dag(const std::string& name, const std::string& source, uint64_t rows, uint32_t length) {
  rm::DagSpec d{name, {loader(0, source, rows * 16)}};
  for (uint32_t j = 1; j < length; ++j) {
    std::string prev = j == 1 ? "c1" : fmt::format("a{}", j - 1);
    rm::OpAddColumns op{{{fmt::format("a{}", j), prev, col::BinOp::Add, "c0"}}, false};
    d.nodes.push_back(compute(j, op, {j - 1}, (j + 1) * rows * 8, rows * 8));
  }
  return d;
}

rm::DagSpec branchout_dag(const std::string& name, const std::string& source, uint64_t rows, uint32_t depth) {
  rm::DagSpec d{name, {loader(0, source, rows * 16)}};
  uint32_t total = (1u << (depth + 1)) - 1;
  for (uint32_t i = 1; i < total; ++i) {
    uint32_t p = (i - 1) / 2;
    uint32_t level = 0;
    for (uint32_t x = i; x > 0; x = (x - 1) / 2) ++level;
    std::string prev = p == 0 ? "c1" : fmt::format("b{}", p);
    rm::OpAddColumns op{{{fmt::format("b{}", i), prev, col::BinOp::Add, "c0"}}, false};
    d.nodes.push_back(compute(i, op, {p}, (level + 1) * rows * 8, rows * 8));
  }
  return d;
}

std::vector<std::string> reshare_ops() {
  return {"drop_cols", "slice", "concat", "add_cols", "filter", "sort", "filter_dic", "sort_dic", "upper"};
}

std::vector<BenchRun> run_bench(const WorkloadSpec& spec, const RunConfig& cfg) {
  if (!(spec.scale > 0 && spec.scale <= 1)) fail(ErrorCode::UsageError, "scale must be in (0, 1]");
  if (spec.chain_length < 1) fail(ErrorCode::UsageError, "chain length must be positive");
  if (spec.kind == Kind::ReshareSuite && !spec.op.empty()) {
    auto ops = reshare_ops();
    if (std::find(ops.begin(), ops.end(), spec.op) == ops.end())
      fail(ErrorCode::UsageError, fmt::format("unknown reshare op '{}'", spec.op));
  }
  Runner R{spec, cfg, cfg.work_dir.empty() ? (fs::temp_directory_path() / "zsim-sources").string() : cfg.work_dir};
  switch (spec.kind) {
    case Kind::CopyAvoidance: return copy_avoidance(R);
    case Kind::SameInput: return same_input(R);
    case Kind::ReshareSuite: return reshare(R);
    case Kind::Chain: return chain(R);
    case Kind::Branchout: return branchout(R);
    case Kind::Mix: return mix(R);
    case Kind::ThreadSweep: return thread_sweep(R);
  }
  return {};
}

}  // namespace zsim::bench
