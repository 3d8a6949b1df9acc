// zsim: source generator, benchmark driver and file inspector.
#include <cstring>
#include <filesystem>
#include <iostream>

#include <fmt/format.h>

#include "CLI11.hpp"

#include "zsim/bench/gen.hpp"
#include "zsim/bench/golden.hpp"
#include "zsim/bench/report.hpp"
#include "zsim/bench/workloads.hpp"
#include "zsim/pqlite/pqlite.hpp"
#include "zsim/sipc/sipc.hpp"
#include "zsim/util/error.hpp"

using namespace zsim;

namespace {

nlohmann::ordered_json report_json(const sipc::SharingReport& r) {
  nlohmann::ordered_json j;
  auto refs = nlohmann::ordered_json::array();
  for (auto& ref : r.refs) refs.push_back({{"segment", ref.segment}, {"offset", ref.offset}, {"length", ref.length}});
  j["refs"] = refs;
  j["segments"] = r.segments();
  j["referenced_bytes"] = r.referenced_bytes();
  j["inline_bytes"] = r.inline_bytes;
  return j;
}

std::string_view encoding_name(pql::Encoding e) {
  switch (e) {
    case pql::Encoding::Plain: return "plain";
    case pql::Encoding::ZigzagDeltaVarint: return "zigzag_delta_varint";
    case pql::Encoding::DictPlain: return "dict_plain";
  }
  return "?";
}

nlohmann::ordered_json source_json(const pql::SourceInfo& info) {
  nlohmann::ordered_json j;
  j["nrows"] = info.nrows;
  j["raw_bytes"] = info.raw_bytes();
  auto cols = nlohmann::ordered_json::array();
  for (size_t i = 0; i < info.schema.fields.size(); ++i) {
    auto& f = info.schema.fields[i];
    cols.push_back({{"name", f.name},
                    {"type", col::to_string(f.type)},
                    {"encoding", encoding_name(info.chunks[i].encoding)},
                    {"raw_len", info.chunks[i].raw_len},
                    {"enc_len", info.chunks[i].enc_len}});
  }
  j["columns"] = cols;
  return j;
}

// Two DAGs loading one source, to show the cache entry they share.
nlohmann::ordered_json decache_demo(const std::string& work_dir) {
  auto path = bench::ensure_source(bench::GenSpec{4096, 4, bench::GenType::Int64}, work_dir);
  engine::EngineConfig cfg;
  engine::Engine e(cfg);
  std::vector<rm::DagSpec> dags;
  for (int i = 0; i < 2; ++i) {
    rm::DagSpec d{fmt::format("demo{}", i), {}};
    rm::NodeSpec l;
    l.id = 0;
    l.code = rm::LoaderCode{path, {}, 0};
    l.mem_estimate = 4096 * 32 * 2;
    rm::NodeSpec s;
    s.id = 1;
    s.code = rm::ComputeOp{rm::OpKernel{col::SumAll{}}};
    s.parents = {0};
    s.mem_estimate = 4096 * 32;
    d.nodes = {l, s};
    dags.push_back(d);
  }
  auto rep = e.run(dags);
  nlohmann::ordered_json j;
  j["loads_executed"] = rep.loads_executed;
  j["cache_hits"] = rep.cache_hits;
  j["entries"] = e.cache()->dump();
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"zsim: zero-copy data pipeline simulator"};
  app.set_config("--config", "", "key=value file mirroring the flags ([bench] section for bench options); flags take precedence");
  app.require_subcommand(1);

  // gen
  bench::GenSpec gs;
  std::string gen_type = "int64", gen_out;
  auto* gen = app.add_subcommand("gen", "Write a PQL1 source file");
  gen->add_option("--rows", gs.rows, "Row count")->capture_default_str();
  gen->add_option("--cols", gs.cols, "Column count")->capture_default_str();
  gen->add_option("--dtype", gen_type, "int64|float64|utf8|mixed")->capture_default_str();
  gen->add_option("--strlen", gs.strlen, "Bytes per string")->capture_default_str();
  gen->add_option("--repeat", gs.repeat_factor, "Occurrences of each unique string")->capture_default_str();
  gen->add_flag("--dict", gs.dict_section, "Dictionary-encode string columns in the file");
  gen->add_flag("--sharp-s", gs.sharp_s, "End the first unique string of each column with U+00DF");
  gen->add_option("--seed", gs.seed, "Generator seed")->capture_default_str();
  gen->add_option("--out", gen_out, "Output path")->required();

  // bench
  bench::WorkloadSpec ws;
  bench::RunConfig rc;
  std::string kind, policy = "adaptive", trigger = "deadlock", json_path, csv_path;
  uint64_t mem_limit = 0;
  auto* b = app.add_subcommand("bench", "Run a benchmark workload");

  b->add_option("kind", kind, "copy|same_input|reshare|chain|branchout|mix|threads")->required();
  b->add_option("--mem-limit", mem_limit, "Memory limit in bytes (default depends on kind)")
      ->transform(CLI::AsSizeValue(false));
  b->add_option("--page-size", rc.engine.store.page_size, "Page size in bytes")->capture_default_str();
  b->add_option("--policy", policy, "none|kswap|rollback|limitdrop|adaptive")->capture_default_str();
  b->add_option("--trigger", trigger, "deadlock|active")->capture_default_str();
  b->add_option("--overcommit", rc.engine.policy.overcommit_pct, "Admission limit in percent of mem-limit")
      ->capture_default_str();
  b->add_option("--theta", rc.engine.policy.adaptive_theta_scale, "Adaptive threshold scale")->capture_default_str();
  b->add_option("--parallel", ws.parallel, "DAG count (mix: worker slots, threads: max threads)");
  b->add_option("--compute-units", ws.compute_units, "Arithmetic per node, relative")->capture_default_str();
  b->add_option("--scale", ws.scale, "Fraction of the full-size workload")->capture_default_str();
  b->add_option("--swap-write-bw", rc.engine.store.swap_write_bw, "Bytes per second")->capture_default_str();
  b->add_option("--swap-read-bw", rc.engine.store.swap_read_bw, "Bytes per second")->capture_default_str();
  b->add_option("--threads", rc.engine.load_threads, "Loader decode threads")->capture_default_str();
  b->add_option("--workers", rc.engine.workers, "Concurrent node slots")->capture_default_str();
  b->add_option("--cost-compute-bw", rc.engine.cost.compute_bw, "Modeled compute rate, bytes/s per unit")
      ->capture_default_str();
  b->add_option("--cost-decode-bw", rc.engine.cost.decode_bw, "Modeled decode rate per thread")->capture_default_str();
  b->add_option("--cost-copy-bw", rc.engine.cost.copy_bw, "Modeled copy rate")->capture_default_str();
  b->add_option("--cost-overhead", rc.engine.cost.node_overhead_s, "Modeled per-node overhead, seconds")
      ->capture_default_str();
  b->add_option("--chain-length", ws.chain_length, "Functions per chain")->capture_default_str();
  b->add_option("--op", ws.op, "Reshare op to run (default: all)");
  b->add_option("--seed", ws.seed, "Workload seed")->capture_default_str();
  b->add_flag("--baseline", rc.engine.baseline, "Copying writer, no DeCache, kswap");
  b->add_flag("--no-decache", [&](int64_t) { rc.engine.use_decache = false; }, "Disable the DeCache");
  b->add_option("--work-dir", rc.work_dir, "Directory for generated sources");
  auto* jo = b->add_option("--json", json_path, "Write JSON report");
  b->add_option("--csv", csv_path, "Write CSV report")->excludes(jo);
  b->add_option("--trace", rc.engine.trace_path, "Write scheduler trace as JSON lines");

  // inspect
  std::string target;
  bool inspect_cache = false;
  auto* ins = app.add_subcommand("inspect", "Describe a SIPC or PQL1 file, or the DeCache");
  ins->add_option("file", target, "File to inspect");
  ins->add_flag("--decache", inspect_cache, "Run a small shared-input workload and dump the cache");
  ins->add_option("--work-dir", rc.work_dir, "Directory for generated sources");

  // golden
  std::string golden_dir;
  auto* gold = app.add_subcommand("golden", "Regenerate the fixed-seed fixture files");
  gold->add_option("dir", golden_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*gen) {
      gs.dtype = bench::parse_gen_type(gen_type);
      bench::gen(gs, gen_out);
    } else if (*b) {
      ws.kind = bench::parse_kind(kind);
      rc.engine.policy.policy = rm::parse_policy(policy);
      rc.engine.policy.trigger = rm::parse_trigger(trigger);
      if (mem_limit) rc.mem_limit = mem_limit;
      auto runs = bench::run_bench(ws, rc);
      if (!csv_path.empty()) bench::emit(runs, bench::Format::Csv, csv_path);
      else bench::emit(runs, bench::Format::Json, json_path);
    } else if (*ins) {
      if (inspect_cache) {
        auto dir = rc.work_dir.empty() ? (std::filesystem::temp_directory_path() / "zsim-sources").string()
                                       : rc.work_dir;
        std::cout << decache_demo(dir).dump(2) << '\n';
      } else {
        if (target.empty()) fail(ErrorCode::UsageError, "inspect needs a file or --decache");
        auto bytes = pql::read_file(target);
        if (bytes.size() >= 4 && std::memcmp(bytes.data(), "PQL1", 4) == 0)
          std::cout << source_json(pql::inspect_source(bytes)).dump(2) << '\n';
        else
          std::cout << report_json(sipc::inspect(bytes)).dump(2) << '\n';
      }
    } else if (*gold) {
      std::filesystem::create_directories(golden_dir);
      auto dir = std::filesystem::path(golden_dir);
      pql::write_file((dir / "golden.pql").string(), bench::golden_pql());
      pql::write_file((dir / "golden_inline.sipc").string(), bench::golden_sipc_inline());
      mem::Store store(mem::StoreConfig{});
      pql::write_file((dir / "golden_ref.sipc").string(), bench::golden_sipc_ref(store));
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::UsageError ? 2 : 1;
  }
  return 0;
}
