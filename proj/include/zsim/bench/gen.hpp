#pragma once

#include <cstdint>
#include <string>

#include "zsim/columnar/array.hpp"
#include "zsim/util/rng.hpp"

namespace zsim::bench {

enum class GenType { Int64, Float64, Utf8, Mixed };

// Throws UsageError.
GenType parse_gen_type(std::string_view s);
std::string_view to_string(GenType t);

// Columns are named c0, c1, ... Mixed makes c0 Int64 and the rest Utf8.
struct GenSpec {
  uint64_t rows = 1000;
  uint32_t cols = 4;
  GenType dtype = GenType::Int64;
  uint32_t strlen = 16;        // bytes per string
  uint32_t repeat_factor = 1;  // each unique string appears this many times
  bool dict_section = false;   // store Utf8 columns dictionary-encoded
  bool sharp_s = false;        // first unique string of each column ends in U+00DF
  uint64_t seed = 1;
};

col::Table generate(const GenSpec& spec, const col::MemoryContext& ctx);
// Writes a PQL1 file. Throws IoError.
void gen(const GenSpec& spec, const std::string& path);

}  // namespace zsim::bench
