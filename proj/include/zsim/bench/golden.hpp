#pragma once

#include <cstddef>
#include <vector>

#include "zsim/columnar/array.hpp"
#include "zsim/memstore/store.hpp"

// Fixed-seed fixtures whose encodings are checked in under tests/data.
namespace zsim::bench {

inline constexpr uint64_t kGoldenSeed = 20240917;

// Int64 and Utf8 columns with nulls, Float64, Bool, and a dictionary column.
col::Table golden_table(const col::MemoryContext& ctx);
// Null-free variant suitable for PQL1.
col::Table golden_source_table(const col::MemoryContext& ctx);

std::vector<std::byte> golden_pql();
// All buffers inline.
std::vector<std::byte> golden_sipc_inline();
// Written against `store`, which must be freshly constructed with default
// page size for the bytes to match; large buffers become references.
std::vector<std::byte> golden_sipc_ref(mem::Store& store);

}  // namespace zsim::bench
