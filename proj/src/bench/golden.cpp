#include "zsim/bench/golden.hpp"

#include <fmt/format.h>

#include "zsim/columnar/build.hpp"
#include "zsim/pqlite/pqlite.hpp"
#include "zsim/sipc/sipc.hpp"
#include "zsim/util/rng.hpp"

namespace zsim::bench {

namespace {

constexpr uint64_t kRows = 1024;

mem::StoreConfig scratch_config() {
  mem::StoreConfig c;
  c.mem_limit = 1ull << 30;
  return c;
}

std::string word(Rng& rng) {
  static const char* words[] = {"alpha", "beta", "gamma", "straße", "delta", "", "epsilon", "zeta"};
  return words[rng.below(8)];
}

}  // namespace

col::Table golden_table(const col::MemoryContext& ctx) {
  Rng rng(kGoldenSeed);
  std::vector<int64_t> ints(kRows);
  std::vector<double> floats(kRows);
  std::vector<std::string> strs(kRows), cats(kRows);
  std::vector<bool> bools(kRows), iv(kRows), sv(kRows);
  for (uint64_t i = 0; i < kRows; ++i) {
    ints[i] = rng.range(-1000000000, 1000000000);
    floats[i] = rng.unit() * 200 - 100;
    strs[i] = word(rng) + std::to_string(i);
    cats[i] = word(rng);
    bools[i] = rng.chance(0.5);
    iv[i] = !rng.chance(0.1);
    sv[i] = !rng.chance(0.1);
  }
  return col::make_table({
      {"id", col::make_int64(ctx, ints, iv)},
      {"x", col::make_float64(ctx, floats)},
      {"name", col::make_utf8(ctx, strs, sv)},
      {"cat", col::dict_encode(ctx, *col::make_utf8(ctx, cats))},
      {"flag", col::make_bool(ctx, bools)},
  });
}

col::Table golden_source_table(const col::MemoryContext& ctx) {
  Rng rng(kGoldenSeed + 1);
  std::vector<int64_t> ints(kRows);
  std::vector<double> floats(kRows);
  std::vector<std::string> strs(kRows), cats(kRows);
  std::vector<bool> bools(kRows);
  int64_t acc = 0;
  for (uint64_t i = 0; i < kRows; ++i) {
    acc += rng.range(-50, 100);
    ints[i] = acc;
    floats[i] = rng.unit();
    strs[i] = word(rng) + std::to_string(i);
    cats[i] = word(rng);
    bools[i] = rng.chance(0.3);
  }
  return col::make_table({
      {"id", col::make_int64(ctx, ints)},
      {"x", col::make_float64(ctx, floats)},
      {"name", col::make_utf8(ctx, strs)},
      {"cat", col::make_utf8(ctx, cats)},
      {"flag", col::make_bool(ctx, bools)},
  });
}

std::vector<std::byte> golden_pql() {
  mem::Store store(scratch_config());
  col::MemoryContext ctx{&store, store.create_account("golden")};
  auto t = golden_source_table(ctx);
  using E = pql::Encoding;
  return pql::encode_source(t, {E::ZigzagDeltaVarint, E::Plain, E::Plain, E::DictPlain, E::Plain});
}

std::vector<std::byte> golden_sipc_inline() {
  mem::Store store(scratch_config());
  auto acc = store.create_account("golden");
  auto t = golden_table(col::MemoryContext{&store, acc});
  return sipc::write(t, store, nullptr, acc, sipc::WriteOptions{true, 0}).file;
}

std::vector<std::byte> golden_sipc_ref(mem::Store& store) {
  auto acc = store.create_account("golden");
  auto t = golden_table(col::MemoryContext{&store, acc});
  return sipc::write(t, store, nullptr, acc).file;
}

}  // namespace zsim::bench
