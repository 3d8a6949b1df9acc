#include "zsim/pqlite/pqlite.hpp"

#include <atomic>
#include <cstring>
#include <fstream>
#include <thread>
#include <unordered_map>

#include <fmt/format.h>

#include "zsim/columnar/build.hpp"
#include "zsim/sipc/format.hpp"
#include "zsim/util/bytes.hpp"
#include "zsim/util/error.hpp"

namespace zsim::pql {

namespace {

constexpr char kMagic[4] = {'P', 'Q', 'L', '1'};

uint64_t utf8_raw_len(uint64_t n, uint64_t bytes) { return 8 * (n + 1) + bytes; }

std::vector<std::byte> encode_column(const col::Field& f, const std::vector<col::ArrayPtr>& chunks, Encoding enc,
                                     uint64_t n, uint64_t* raw_len) {
  using col::DType;
  bool ok = enc == Encoding::Plain || (enc == Encoding::ZigzagDeltaVarint && f.type == DType::Int64) ||
            (enc == Encoding::DictPlain && f.type == DType::Utf8);
  if (!ok) fail(ErrorCode::EncodingMismatch, fmt::format("column '{}' cannot use encoding {}", f.name, int(enc)));
  ByteWriter w;
  switch (f.type) {
    case DType::Int64:
    case DType::Float64: {
      *raw_len = 8 * n;
      int64_t prev = 0;
      for (auto& c : chunks) {
        col::ArrayReader r(*c);
        for (uint64_t i = 0; i < c->length; ++i) {
          if (enc == Encoding::Plain) {
            if (f.type == DType::Int64) w.i64(r.i64(i));
            else w.f64(r.f64(i));
          } else {
            int64_t v = r.i64(i);
            w.varint(zigzag(int64_t(uint64_t(v) - uint64_t(prev))));
            prev = v;
          }
        }
      }
      break;
    }
    case DType::Bool: {
      std::vector<std::byte> bits(col::bitmap_bytes(n));
      uint64_t row = 0;
      for (auto& c : chunks) {
        col::ArrayReader r(*c);
        for (uint64_t i = 0; i < c->length; ++i) col::set_bit(bits.data(), row++, r.boolean(i));
      }
      *raw_len = bits.size();
      w.bytes(bits);
      break;
    }
    case DType::Utf8: {
      std::vector<std::string> vals;
      for (auto& c : chunks) {
        col::ArrayReader r(*c);
        for (uint64_t i = 0; i < c->length; ++i) vals.emplace_back(r.str(i));
      }
      uint64_t total = 0;
      for (auto& s : vals) total += s.size();
      *raw_len = utf8_raw_len(n, total);
      if (enc == Encoding::Plain) {
        w.u32(uint32_t(n));
        uint32_t off = 0;
        w.u32(0);
        for (auto& s : vals) w.u32(off += uint32_t(s.size()));
        for (auto& s : vals) w.str(s);
      } else {
        std::vector<std::string> dict;
        std::unordered_map<std::string, int32_t> index;
        std::vector<int32_t> codes;
        for (auto& s : vals) {
          auto [it, fresh] = index.emplace(s, int32_t(dict.size()));
          if (fresh) dict.push_back(s);
          codes.push_back(it->second);
        }
        w.u32(uint32_t(dict.size()));
        uint32_t off = 0;
        w.u32(0);
        for (auto& s : dict) w.u32(off += uint32_t(s.size()));
        for (auto& s : dict) w.str(s);
        for (auto c : codes) w.u32(uint32_t(c));
      }
      break;
    }
  }
  return w.take();
}

// Decoded column in heap scratch, before it is placed into the store.
struct Decoded {
  std::vector<int64_t> ints;
  std::vector<double> floats;
  std::vector<bool> bools;
  std::vector<std::string> strings;
};

[[noreturn]] void corrupt(const std::string& col, const std::string& why) {
  fail(ErrorCode::CorruptChunk, fmt::format("column '{}': {}", col, why));
}

void decode_utf8_table(ByteReader& r, const std::string& name, std::vector<std::string>& out) {
  uint32_t n = r.u32();
  if (uint64_t(n) * 4 > r.remaining()) corrupt(name, "string count exceeds chunk");
  std::vector<uint32_t> off(n + 1);
  for (auto& o : off) o = r.u32();
  if (off[0] != 0) corrupt(name, "offsets do not start at 0");
  for (uint32_t i = 0; i < n; ++i)
    if (off[i + 1] < off[i]) corrupt(name, "offsets decrease");
  auto bytes = r.bytes(off[n]);
  out.resize(n);
  for (uint32_t i = 0; i < n; ++i)
    out[i].assign(reinterpret_cast<const char*>(bytes.data()) + off[i], off[i + 1] - off[i]);
}

Decoded decode_column(const col::Field& f, const ChunkInfo& info, std::span<const std::byte> payload,
                      uint64_t n) {
  using col::DType;
  Decoded d;
  try {
    ByteReader r(payload, int(ErrorCode::CorruptChunk));
    uint64_t produced = 0;
    switch (f.type) {
      case DType::Int64:
        d.ints.resize(n);
        if (info.encoding == Encoding::Plain) {
          for (auto& v : d.ints) v = r.i64();
        } else {
          int64_t prev = 0;
          for (auto& v : d.ints) prev = v = int64_t(uint64_t(prev) + uint64_t(unzigzag(r.varint())));
        }
        produced = 8 * n;
        break;
      case DType::Float64:
        d.floats.resize(n);
        for (auto& v : d.floats) v = r.f64();
        produced = 8 * n;
        break;
      case DType::Bool: {
        auto bits = r.bytes(col::bitmap_bytes(n));
        d.bools.resize(n);
        for (uint64_t i = 0; i < n; ++i) d.bools[i] = col::bit_at(bits.data(), i);
        produced = bits.size();
        break;
      }
      case DType::Utf8: {
        if (info.encoding == Encoding::Plain) {
          decode_utf8_table(r, f.name, d.strings);
          if (d.strings.size() != n) corrupt(f.name, "row count mismatch");
        } else {
          std::vector<std::string> dict;
          decode_utf8_table(r, f.name, dict);
          d.strings.resize(n);
          for (auto& s : d.strings) {
            uint32_t c = r.u32();
            if (c >= dict.size()) corrupt(f.name, fmt::format("code {} outside dictionary", c));
            s = dict[c];
          }
        }
        uint64_t total = 0;
        for (auto& s : d.strings) total += s.size();
        produced = utf8_raw_len(n, total);
        break;
      }
    }
    if (!r.done()) corrupt(f.name, "trailing payload bytes");
    if (produced != info.raw_len) corrupt(f.name, fmt::format("decoded {} bytes, header says {}", produced, info.raw_len));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CorruptChunk) throw;
    corrupt(f.name, e.what());
  }
  return d;
}

struct Parsed {
  SourceInfo info;
  std::vector<std::span<const std::byte>> payloads;
};

Parsed parse(std::span<const std::byte> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) fail(ErrorCode::BadMagic, "not a PQL1 file");
  ByteReader r(bytes.subspan(4), int(ErrorCode::CorruptChunk));
  Parsed p;
  uint32_t slen = r.u32();
  ByteReader sr(r.bytes(slen), int(ErrorCode::CorruptChunk));
  p.info.schema = sipc::decode_schema(sr, ErrorCode::CorruptChunk);
  p.info.nrows = r.u64();
  for (size_t i = 0; i < p.info.schema.size(); ++i) {
    ChunkInfo c;
    uint8_t tag = r.u8();
    if (tag > 2) fail(ErrorCode::CorruptChunk, fmt::format("bad encoding tag {}", tag));
    c.encoding = Encoding(tag);
    c.raw_len = r.u64();
    c.enc_len = r.u64();
    p.payloads.push_back(r.bytes(c.enc_len));
    p.info.chunks.push_back(c);
  }
  if (!r.done()) fail(ErrorCode::CorruptChunk, "trailing bytes");
  return p;
}

}  // namespace

uint64_t SourceInfo::raw_bytes() const {
  uint64_t s = 0;
  for (auto& c : chunks) s += c.raw_len;
  return s;
}

std::vector<std::byte> encode_source(const col::Table& t, const std::vector<Encoding>& encodings) {
  if (encodings.size() != t.ncols()) fail(ErrorCode::LengthMismatch, "one encoding per column required");
  ByteWriter w;
  w.bytes(std::as_bytes(std::span(kMagic)));
  col::Schema schema = t.schema;
  for (auto& f : schema.fields) f.dict = false;
  ByteWriter s;
  sipc::encode_schema(s, schema);
  w.u32(uint32_t(s.size()));
  w.bytes(s.buffer());
  w.u64(t.nrows());
  for (size_t c = 0; c < t.ncols(); ++c) {
    auto chunks = t.column(c);
    for (auto& a : chunks) {
      if (a->null_count) fail(ErrorCode::EncodingMismatch, fmt::format("column '{}' has nulls", schema.fields[c].name));
    }
    // Dictionary-encoded inputs are written by value.
    if (t.schema.fields[c].dict) {
      col::MemoryContext ctx{chunks.empty() ? nullptr : chunks[0]->dict->codes.core()->store(), mem::kRootAccount};
      for (auto& a : chunks) a = col::decode(ctx, *a);
    }
    uint64_t raw = 0;
    auto payload = encode_column(schema.fields[c], chunks, encodings[c], t.nrows(), &raw);
    w.u8(uint8_t(encodings[c]));
    w.u64(raw);
    w.u64(payload.size());
    w.bytes(payload);
  }
  return w.take();
}

void write_source(const col::Table& t, const std::string& path, const std::vector<Encoding>& encodings) {
  write_file(path, encode_source(t, encodings));
}

col::Table decode_source(std::span<const std::byte> bytes, const LoadOptions& opts, const col::MemoryContext& ctx) {
  auto p = parse(bytes);
  auto& schema = p.info.schema;
  for (auto& name : opts.dict_columns) {
    auto i = schema.index_of(name);
    if (schema.fields[i].type != col::DType::Utf8)
      fail(ErrorCode::TypeError, fmt::format("dictionary option on non-Utf8 column '{}'", name));
  }
  size_t ncols = schema.size();
  std::vector<Decoded> decoded(ncols);
  std::vector<std::exception_ptr> errors(ncols);
  unsigned threads = opts.threads ? opts.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = unsigned(std::min<size_t>(threads, std::max<size_t>(ncols, 1)));
  std::atomic<size_t> next{0};
  auto work = [&] {
    for (size_t c; (c = next++) < ncols;) {
      try {
        decoded[c] = decode_column(schema.fields[c], p.info.chunks[c], p.payloads[c], p.info.nrows);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < threads; ++i) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  // Placement into the store is serial so allocation order is deterministic.
  std::vector<std::pair<std::string, col::ArrayPtr>> cols;
  for (size_t c = 0; c < ncols; ++c) {
    auto& f = schema.fields[c];
    auto& d = decoded[c];
    col::ArrayPtr a;
    switch (f.type) {
      case col::DType::Int64: a = col::make_int64(ctx, d.ints); break;
      case col::DType::Float64: a = col::make_float64(ctx, d.floats); break;
      case col::DType::Bool: a = col::make_bool(ctx, d.bools); break;
      case col::DType::Utf8:
        a = col::make_utf8(ctx, d.strings);
        if (opts.dict_columns.count(f.name)) a = col::dict_encode(ctx, *a);
        break;
    }
    d = Decoded{};
    cols.emplace_back(f.name, std::move(a));
  }
  if (ncols == 0) return col::Table{};
  return col::make_table(std::move(cols));
}

col::Table load_source(const std::string& path, const LoadOptions& opts, const col::MemoryContext& ctx) {
  auto bytes = read_file(path);
  return decode_source(bytes, opts, ctx);
}

SourceInfo inspect_source(std::span<const std::byte> bytes) { return parse(bytes).info; }
SourceInfo inspect_source(const std::string& path) { return inspect_source(read_file(path)); }

std::vector<std::byte> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, fmt::format("cannot open '{}'", path));
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::byte> out(buf.size());
  if (!buf.empty()) std::memcpy(out.data(), buf.data(), buf.size());
  return out;
}

void write_file(const std::string& path, std::span<const std::byte> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, fmt::format("cannot create '{}'", path));
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) fail(ErrorCode::IoError, fmt::format("write to '{}' failed", path));
}

}  // namespace zsim::pql
