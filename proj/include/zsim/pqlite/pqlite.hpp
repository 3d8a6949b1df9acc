#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "zsim/columnar/array.hpp"

// PQL1: a small columnar source format standing in for Parquet.
namespace zsim::pql {

enum class Encoding : uint8_t { Plain = 0, ZigzagDeltaVarint = 1, DictPlain = 2 };

struct LoadOptions {
  std::set<std::string> dict_columns;
  unsigned threads = 0;  // 0: hardware concurrency
};

struct ChunkInfo {
  Encoding encoding = Encoding::Plain;
  uint64_t raw_len = 0;
  uint64_t enc_len = 0;
};

struct SourceInfo {
  col::Schema schema;
  uint64_t nrows = 0;
  std::vector<ChunkInfo> chunks;
  uint64_t raw_bytes() const;
};

inline uint64_t zigzag(int64_t v) { return (uint64_t(v) << 1) ^ uint64_t(v >> 63); }
inline int64_t unzigzag(uint64_t v) { return int64_t(v >> 1) ^ -int64_t(v & 1); }

// One encoding per column. Throws EncodingMismatch; nulls are not supported.
std::vector<std::byte> encode_source(const col::Table& t, const std::vector<Encoding>& encodings);
void write_source(const col::Table& t, const std::string& path, const std::vector<Encoding>& encodings);

// Throws BadMagic, CorruptChunk, UnknownColumn (dict_columns).
col::Table decode_source(std::span<const std::byte> bytes, const LoadOptions& opts, const col::MemoryContext& ctx);
col::Table load_source(const std::string& path, const LoadOptions& opts, const col::MemoryContext& ctx);

SourceInfo inspect_source(std::span<const std::byte> bytes);
SourceInfo inspect_source(const std::string& path);

std::vector<std::byte> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::byte> bytes);

}  // namespace zsim::pql
