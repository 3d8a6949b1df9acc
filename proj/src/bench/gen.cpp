#include "zsim/bench/gen.hpp"

#include <fmt/format.h>

#include "zsim/columnar/build.hpp"
#include "zsim/memstore/store.hpp"
#include "zsim/pqlite/pqlite.hpp"
#include "zsim/util/error.hpp"

namespace zsim::bench {

GenType parse_gen_type(std::string_view s) {
  for (auto t : {GenType::Int64, GenType::Float64, GenType::Utf8, GenType::Mixed})
    if (to_string(t) == s) return t;
  fail(ErrorCode::UsageError, fmt::format("unknown dtype '{}'", s));
}

std::string_view to_string(GenType t) {
  switch (t) {
    case GenType::Int64: return "int64";
    case GenType::Float64: return "float64";
    case GenType::Utf8: return "utf8";
    case GenType::Mixed: return "mixed";
  }
  return "?";
}

namespace {

std::vector<std::string> strings(const GenSpec& s, Rng& rng) {
  uint64_t r = std::max<uint32_t>(1, s.repeat_factor);
  uint64_t uniq = (s.rows + r - 1) / r;
  std::vector<std::string> dict(uniq);
  for (uint64_t k = 0; k < uniq; ++k) {
    std::string v(s.strlen, 'a');
    // Leading base-26 digits make values distinct; the rest is random.
    uint64_t x = k;
    size_t i = 0;
    for (; i < v.size() && (x > 0 || i == 0); ++i, x /= 26) v[i] = char('a' + x % 26);
    for (; i < v.size(); ++i) v[i] = char('a' + rng.below(26));
    dict[k] = std::move(v);
  }
  if (s.sharp_s && uniq > 0 && s.strlen >= 3) {
    dict[0][s.strlen - 2] = char(0xC3);
    dict[0][s.strlen - 1] = char(0x9F);
  }
  std::vector<std::string> out(s.rows);
  for (uint64_t i = 0; i < s.rows; ++i) out[i] = dict[i / r];
  for (uint64_t i = s.rows; i > 1; --i) std::swap(out[i - 1], out[rng.below(i)]);
  return out;
}

}  // namespace

col::Table generate(const GenSpec& s, const col::MemoryContext& ctx) {
  if (s.cols == 0) fail(ErrorCode::UsageError, "cols must be positive");
  std::vector<std::pair<std::string, col::ArrayPtr>> columns;
  for (uint32_t c = 0; c < s.cols; ++c) {
    Rng rng(s.seed * 1000003 + c);
    GenType t = s.dtype == GenType::Mixed ? (c == 0 ? GenType::Int64 : GenType::Utf8) : s.dtype;
    col::ArrayPtr a;
    if (t == GenType::Int64) {
      std::vector<int64_t> v(s.rows);
      for (auto& x : v) x = rng.range(-1000000, 1000000);
      a = col::make_int64(ctx, v);
    } else if (t == GenType::Float64) {
      std::vector<double> v(s.rows);
      for (auto& x : v) x = rng.unit() * 2000.0 - 1000.0;
      a = col::make_float64(ctx, v);
    } else {
      a = col::make_utf8(ctx, strings(s, rng));
    }
    columns.emplace_back(fmt::format("c{}", c), a);
  }
  return col::make_table(std::move(columns));
}

void gen(const GenSpec& s, const std::string& path) {
  mem::StoreConfig sc;
  sc.mem_limit = 1ull << 40;
  mem::Store store(sc);
  auto acc = store.create_account("gen");
  auto t = generate(s, col::MemoryContext{&store, acc});
  std::vector<pql::Encoding> enc;
  for (auto& f : t.schema.fields) {
    if (f.type == col::DType::Int64) enc.push_back(pql::Encoding::ZigzagDeltaVarint);
    else if (f.type == col::DType::Utf8 && s.dict_section) enc.push_back(pql::Encoding::DictPlain);
    else enc.push_back(pql::Encoding::Plain);
  }
  pql::write_source(t, path, enc);
}

}  // namespace zsim::bench
