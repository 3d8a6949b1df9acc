#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "zsim/columnar/array.hpp"
#include "zsim/columnar/logical.hpp"

namespace zsim::col {

using Validity = std::optional<std::vector<bool>>;

// Throws TypeError on dtype/value mismatch, LengthMismatch on validity size.
ArrayPtr make_array(const MemoryContext& ctx, DType dtype, const std::vector<Value>& values,
                    const Validity& validity = std::nullopt);
ArrayPtr make_int64(const MemoryContext& ctx, std::span<const int64_t> values, const Validity& validity = std::nullopt);
ArrayPtr make_float64(const MemoryContext& ctx, std::span<const double> values,
                      const Validity& validity = std::nullopt);
ArrayPtr make_utf8(const MemoryContext& ctx, const std::vector<std::string>& values,
                   const Validity& validity = std::nullopt);
ArrayPtr make_bool(const MemoryContext& ctx, const std::vector<bool>& values, const Validity& validity = std::nullopt);

// Single-batch table; schema derived from the arrays.
Table make_table(std::vector<std::pair<std::string, ArrayPtr>> columns);
Field field_for(std::string name, const Array& a);

Mask make_mask(const MemoryContext& ctx, const std::vector<bool>& bits);

// Plain Utf8 -> dictionary-encoded (first-occurrence order, i32 codes).
ArrayPtr dict_encode(const MemoryContext& ctx, const Array& a);
// Dictionary-encoded -> plain Utf8.
ArrayPtr decode(const MemoryContext& ctx, const Array& a);

// Validity bitmap for the window [start, start+len) of `a`, or absent if the
// window has no nulls. Sets *nulls.
Buffer window_validity(const MemoryContext& ctx, const Array& a, uint64_t start, uint64_t len, uint64_t* nulls);
// Deep copy into fresh anonymous buffers.
ArrayPtr copy_array(const MemoryContext& ctx, const Array& a);

}  // namespace zsim::col
