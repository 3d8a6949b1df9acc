#include "zsim/columnar/build.hpp"

#include <cstring>
#include <unordered_map>

#include <fmt/format.h>

#include "zsim/util/error.hpp"

namespace zsim::col {

namespace {

// Returns validity buffer (absent if no nulls) and sets null_count.
Buffer build_validity(const MemoryContext& ctx, uint64_t n, const std::vector<bool>& valid, uint64_t* nulls) {
  *nulls = 0;
  for (bool v : valid) *nulls += !v;
  if (*nulls == 0) return {};
  WritableBuffer w(ctx, bitmap_bytes(n));
  std::memset(w.data(), 0, w.size());
  for (uint64_t i = 0; i < n; ++i)
    if (valid[i]) set_bit(w.data(), i, true);
  return w.seal();
}

std::vector<bool> effective_validity(size_t n, const Validity& validity) {
  if (validity && validity->size() != n)
    fail(ErrorCode::LengthMismatch, fmt::format("{} values but {} validity entries", n, validity->size()));
  return validity ? *validity : std::vector<bool>(n, true);
}

Buffer build_utf8_values(const MemoryContext& ctx, const std::vector<std::string>& values,
                         const std::vector<bool>& valid, Buffer* offsets_out) {
  uint64_t n = values.size();
  WritableBuffer off(ctx, (n + 1) * 8);
  auto o = off.as<int64_t>();
  int64_t total = 0;
  for (uint64_t i = 0; i < n; ++i) {
    o[i] = total;
    if (valid[i]) total += int64_t(values[i].size());
  }
  o[n] = total;
  WritableBuffer val(ctx, uint64_t(total));
  for (uint64_t i = 0; i < n; ++i)
    if (valid[i] && !values[i].empty()) std::memcpy(val.data() + o[i], values[i].data(), values[i].size());
  *offsets_out = off.seal();
  return val.seal();
}

}  // namespace

ArrayPtr make_int64(const MemoryContext& ctx, std::span<const int64_t> values, const Validity& validity) {
  auto valid = effective_validity(values.size(), validity);
  auto a = std::make_shared<Array>();
  a->dtype = DType::Int64;
  a->length = values.size();
  a->validity = build_validity(ctx, a->length, valid, &a->null_count);
  a->values = make_buffer(ctx, std::as_bytes(values));
  return a;
}

ArrayPtr make_float64(const MemoryContext& ctx, std::span<const double> values, const Validity& validity) {
  auto valid = effective_validity(values.size(), validity);
  auto a = std::make_shared<Array>();
  a->dtype = DType::Float64;
  a->length = values.size();
  a->validity = build_validity(ctx, a->length, valid, &a->null_count);
  a->values = make_buffer(ctx, std::as_bytes(values));
  return a;
}

ArrayPtr make_utf8(const MemoryContext& ctx, const std::vector<std::string>& values, const Validity& validity) {
  auto valid = effective_validity(values.size(), validity);
  auto a = std::make_shared<Array>();
  a->dtype = DType::Utf8;
  a->length = values.size();
  a->validity = build_validity(ctx, a->length, valid, &a->null_count);
  a->values = build_utf8_values(ctx, values, valid, &a->offsets);
  return a;
}

ArrayPtr make_bool(const MemoryContext& ctx, const std::vector<bool>& values, const Validity& validity) {
  auto valid = effective_validity(values.size(), validity);
  auto a = std::make_shared<Array>();
  a->dtype = DType::Bool;
  a->length = values.size();
  a->validity = build_validity(ctx, a->length, valid, &a->null_count);
  WritableBuffer w(ctx, bitmap_bytes(a->length));
  if (w.size()) std::memset(w.data(), 0, w.size());
  for (uint64_t i = 0; i < a->length; ++i)
    if (values[i] && valid[i]) set_bit(w.data(), i, true);
  a->values = w.seal();
  return a;
}

ArrayPtr make_array(const MemoryContext& ctx, DType dtype, const std::vector<Value>& values, const Validity& validity) {
  auto valid = effective_validity(values.size(), validity);
  size_t n = values.size();
  for (size_t i = 0; i < n; ++i)
    if (std::holds_alternative<std::monostate>(values[i])) valid[i] = false;
  auto mismatch = [&](size_t i) {
    fail(ErrorCode::TypeError, fmt::format("value {} ({}) does not match dtype {}", i, to_string(values[i]),
                                           to_string(dtype)));
  };
  switch (dtype) {
    case DType::Int64: {
      std::vector<int64_t> v(n, 0);
      for (size_t i = 0; i < n; ++i) {
        if (!valid[i]) continue;
        if (auto p = std::get_if<int64_t>(&values[i])) v[i] = *p;
        else mismatch(i);
      }
      return make_int64(ctx, v, valid);
    }
    case DType::Float64: {
      std::vector<double> v(n, 0.0);
      for (size_t i = 0; i < n; ++i) {
        if (!valid[i]) continue;
        if (auto p = std::get_if<double>(&values[i])) v[i] = *p;
        else mismatch(i);
      }
      return make_float64(ctx, v, valid);
    }
    case DType::Utf8: {
      std::vector<std::string> v(n);
      for (size_t i = 0; i < n; ++i) {
        if (!valid[i]) continue;
        if (auto p = std::get_if<std::string>(&values[i])) v[i] = *p;
        else mismatch(i);
      }
      return make_utf8(ctx, v, valid);
    }
    case DType::Bool: {
      std::vector<bool> v(n, false);
      for (size_t i = 0; i < n; ++i) {
        if (!valid[i]) continue;
        if (auto p = std::get_if<bool>(&values[i])) v[i] = *p;
        else mismatch(i);
      }
      return make_bool(ctx, v, valid);
    }
  }
  fail(ErrorCode::TypeError, "unknown dtype");
}

Field field_for(std::string name, const Array& a) {
  return Field{std::move(name), a.dtype, a.is_dict(), a.null_count > 0};
}

Table make_table(std::vector<std::pair<std::string, ArrayPtr>> columns) {
  Table t;
  RecordBatch b;
  for (size_t i = 0; i < columns.size(); ++i) {
    auto& [name, arr] = columns[i];
    if (t.schema.contains(name)) fail(ErrorCode::SchemaMismatch, fmt::format("duplicate column '{}'", name));
    if (i && arr->length != b.nrows)
      fail(ErrorCode::LengthMismatch, fmt::format("column '{}' has {} rows, expected {}", name, arr->length, b.nrows));
    b.nrows = arr->length;
    t.schema.fields.push_back(field_for(name, *arr));
    b.columns.push_back(arr);
  }
  t.batches.push_back(std::move(b));
  return t;
}

Mask make_mask(const MemoryContext& ctx, const std::vector<bool>& bits) {
  WritableBuffer w(ctx, bitmap_bytes(bits.size()));
  if (w.size()) std::memset(w.data(), 0, w.size());
  for (size_t i = 0; i < bits.size(); ++i)
    if (bits[i]) set_bit(w.data(), i, true);
  return Mask{w.seal(), bits.size()};
}

Buffer window_validity(const MemoryContext& ctx, const Array& a, uint64_t start, uint64_t len, uint64_t* nulls) {
  *nulls = 0;
  if (!a.validity) return {};
  if (start == 0 && len == a.length) {
    *nulls = a.null_count;
    return a.validity;
  }
  auto p = a.validity.pin();
  for (uint64_t i = 0; i < len; ++i) *nulls += !bit_at(p.data(), start + i);
  if (*nulls == 0) return {};
  WritableBuffer w(ctx, bitmap_bytes(len));
  std::memset(w.data(), 0, w.size());
  for (uint64_t i = 0; i < len; ++i)
    if (bit_at(p.data(), start + i)) set_bit(w.data(), i, true);
  return w.seal();
}

ArrayPtr dict_encode(const MemoryContext& ctx, const Array& a) {
  if (a.dtype != DType::Utf8 || a.is_dict())
    fail(ErrorCode::TypeError, "dict_encode needs a plain Utf8 array");
  ArrayReader r(a);
  std::unordered_map<std::string_view, int32_t> index;
  std::vector<std::string> uniques;
  WritableBuffer codes(ctx, a.length * 4);
  auto c = codes.as<int32_t>();
  for (uint64_t i = 0; i < a.length; ++i) {
    if (r.is_null(i)) {
      c[i] = 0;
      continue;
    }
    auto s = r.str(i);
    auto [it, fresh] = index.try_emplace(s, int32_t(uniques.size()));
    if (fresh) uniques.emplace_back(s);
    c[i] = it->second;
  }
  auto out = std::make_shared<Array>();
  out->dtype = DType::Utf8;
  out->length = a.length;
  out->null_count = a.null_count;
  uint64_t nulls;
  out->validity = window_validity(ctx, a, 0, a.length, &nulls);
  out->dict = DictData{next_dict_id(), make_utf8(ctx, uniques), codes.seal()};
  return out;
}

ArrayPtr decode(const MemoryContext& ctx, const Array& a) {
  if (!a.is_dict()) fail(ErrorCode::TypeError, "decode needs a dictionary-encoded array");
  ArrayReader r(a);
  std::vector<std::string> v(a.length);
  std::vector<bool> valid(a.length, true);
  for (uint64_t i = 0; i < a.length; ++i) {
    if (r.is_null(i)) valid[i] = false;
    else v[i] = std::string(r.str(i));
  }
  return make_utf8(ctx, v, valid);
}

ArrayPtr copy_array(const MemoryContext& ctx, const Array& a) {
  auto out = std::make_shared<Array>();
  out->dtype = a.dtype;
  out->length = a.length;
  out->null_count = a.null_count;
  if (a.validity) out->validity = make_buffer(ctx, a.validity.pin().bytes().first(bitmap_bytes(a.length)));
  if (a.dict) {
    out->dict = DictData{next_dict_id(), copy_array(ctx, *a.dict->dictionary),
                         make_buffer(ctx, a.dict->codes.pin().bytes().first(a.length * 4))};
    return out;
  }
  switch (a.dtype) {
    case DType::Int64:
    case DType::Float64:
      out->values = make_buffer(ctx, a.values.pin().bytes().first(a.length * 8));
      break;
    case DType::Bool:
      out->values = make_buffer(ctx, a.values.pin().bytes().first(bitmap_bytes(a.length)));
      break;
    case DType::Utf8: {
      auto op = a.offsets.pin();
      auto o = op.as<int64_t>() + a.slice_offset;
      WritableBuffer off(ctx, (a.length + 1) * 8);
      auto no = off.as<int64_t>();
      for (uint64_t i = 0; i <= a.length; ++i) no[i] = o[i] - o[0];
      out->offsets = off.seal();
      uint64_t nbytes = uint64_t(o[a.length] - o[0]);
      if (nbytes) out->values = make_buffer(ctx, a.values.pin().bytes().subspan(uint64_t(o[0]), nbytes));
      break;
    }
  }
  return out;
}

}  // namespace zsim::col
