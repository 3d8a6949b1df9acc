#include "zsim/columnar/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <set>
#include <unordered_map>

#include <fmt/format.h>

#include "zsim/columnar/build.hpp"
#include "zsim/util/error.hpp"

namespace zsim::col {

namespace {

constexpr int64_t kParallelRows = 4096;

struct RowRef {
  uint32_t chunk;
  uint64_t row;
};

ArrayPtr slice_array(const MemoryContext& ctx, const ArrayPtr& src, uint64_t s, uint64_t n) {
  const Array& a = *src;
  if (s == 0 && n == a.length) return src;
  auto out = std::make_shared<Array>(a);
  out->length = n;
  out->validity = window_validity(ctx, a, s, n, &out->null_count);
  if (a.dict) {
    out->dict->codes = n ? a.dict->codes.view(s * 4, n * 4) : Buffer{};
    return out;
  }
  switch (a.dtype) {
    case DType::Int64:
    case DType::Float64:
      out->values = n ? a.values.view(s * 8, n * 8) : Buffer{};
      break;
    case DType::Bool:
      if (n == 0) {
        out->values = {};
      } else if (s % 8 == 0) {
        out->values = a.values.view(s / 8, bitmap_bytes(n));
      } else {
        // Bit-shifted window cannot be a byte view.
        auto p = a.values.pin();
        WritableBuffer w(ctx, bitmap_bytes(n));
        std::memset(w.data(), 0, w.size());
        for (uint64_t i = 0; i < n; ++i)
          if (bit_at(p.data(), s + i)) set_bit(w.data(), i, true);
        out->values = w.seal();
      }
      break;
    case DType::Utf8:
      out->slice_offset = a.slice_offset + s;
      break;
  }
  return out;
}

// Batch index and local row range covering global rows [start, end).
std::vector<ArrayPtr> slice_batch_columns(const MemoryContext& ctx, const RecordBatch& b, uint64_t s, uint64_t n) {
  std::vector<ArrayPtr> cols;
  for (auto& a : b.columns) cols.push_back(slice_array(ctx, a, s, n));
  return cols;
}

bool less_double(double a, double b) {
  bool na = std::isnan(a), nb = std::isnan(b);
  if (na || nb) return !na && nb;
  return a < b;
}

Buffer gather_validity(const MemoryContext& ctx, const std::vector<const ArrayReader*>& rd,
                       const std::vector<RowRef>& rows, uint64_t* nulls) {
  *nulls = 0;
  bool any = false;
  for (auto r : rd) any |= bool(r->array().validity);
  if (!any) return {};
  for (auto& rr : rows) *nulls += rd[rr.chunk]->is_null(rr.row);
  if (*nulls == 0) return {};
  WritableBuffer w(ctx, bitmap_bytes(rows.size()));
  std::memset(w.data(), 0, w.size());
  for (uint64_t i = 0; i < rows.size(); ++i)
    if (!rd[rows[i].chunk]->is_null(rows[i].row)) set_bit(w.data(), i, true);
  return w.seal();
}

Buffer gather_utf8(const MemoryContext& ctx, const std::vector<const ArrayReader*>& rd, const std::vector<RowRef>& rows,
                   Buffer* offsets_out) {
  int64_t n = int64_t(rows.size());
  WritableBuffer off(ctx, uint64_t(n + 1) * 8);
  auto o = off.as<int64_t>();
  int64_t total = 0;
  for (int64_t i = 0; i < n; ++i) {
    o[i] = total;
    total += int64_t(rd[rows[i].chunk]->str(rows[i].row).size());
  }
  o[n] = total;
  WritableBuffer val(ctx, uint64_t(total));
  auto dst = val.data();
#pragma omp parallel for schedule(static) if (n > kParallelRows)
  for (int64_t i = 0; i < n; ++i) {
    auto s = rd[rows[i].chunk]->str(rows[i].row);
    if (!s.empty()) std::memcpy(dst + o[i], s.data(), s.size());
  }
  *offsets_out = off.seal();
  return val.seal();
}

// Gather rows drawn from several chunks of one column into a single array.
ArrayPtr take_rows(const MemoryContext& ctx, const std::vector<ArrayPtr>& chunks, const std::vector<RowRef>& rows) {
  std::vector<std::unique_ptr<ArrayReader>> owned;
  std::vector<const ArrayReader*> rd;
  for (auto& c : chunks) {
    owned.push_back(std::make_unique<ArrayReader>(*c));
    rd.push_back(owned.back().get());
  }
  const Array& first = *chunks.at(0);
  int64_t n = int64_t(rows.size());
  auto out = std::make_shared<Array>();
  out->dtype = first.dtype;
  out->length = uint64_t(n);
  out->validity = gather_validity(ctx, rd, rows, &out->null_count);

  if (first.is_dict()) {
    bool shared = true;
    for (auto& c : chunks) shared &= c->is_dict() && c->dict->dictionary == first.dict->dictionary;
    WritableBuffer codes(ctx, uint64_t(n) * 4);
    auto dst = codes.as<int32_t>();
    if (shared) {
#pragma omp parallel for schedule(static) if (n > kParallelRows)
      for (int64_t i = 0; i < n; ++i) dst[i] = rd[rows[i].chunk]->code(rows[i].row);
      out->dict = DictData{first.dict->dict_id, first.dict->dictionary, codes.seal()};
    } else {
      // Chunks disagree on the dictionary: build a unified one.
      std::unordered_map<std::string_view, int32_t> index;
      std::vector<std::string> uniques;
      for (int64_t i = 0; i < n; ++i) {
        auto& rr = rows[i];
        if (rd[rr.chunk]->is_null(rr.row)) {
          dst[i] = 0;
          continue;
        }
        auto s = rd[rr.chunk]->str(rr.row);
        auto [it, fresh] = index.try_emplace(s, int32_t(uniques.size()));
        if (fresh) uniques.emplace_back(s);
        dst[i] = it->second;
      }
      out->dict = DictData{next_dict_id(), make_utf8(ctx, uniques), codes.seal()};
    }
    if (n == 0) out->dict->codes = {};
    return out;
  }

  switch (first.dtype) {
    case DType::Int64:
    case DType::Float64: {
      WritableBuffer w(ctx, uint64_t(n) * 8);
      auto dst = w.as<uint64_t>();
#pragma omp parallel for schedule(static) if (n > kParallelRows)
      for (int64_t i = 0; i < n; ++i) {
        int64_t v = rd[rows[i].chunk]->i64(rows[i].row);
        std::memcpy(dst + i, &v, 8);
      }
      out->values = w.seal();
      break;
    }
    case DType::Bool: {
      WritableBuffer w(ctx, bitmap_bytes(uint64_t(n)));
      if (w.size()) std::memset(w.data(), 0, w.size());
      for (int64_t i = 0; i < n; ++i)
        if (rd[rows[i].chunk]->boolean(rows[i].row)) set_bit(w.data(), uint64_t(i), true);
      out->values = w.seal();
      break;
    }
    case DType::Utf8:
      out->values = gather_utf8(ctx, rd, rows, &out->offsets);
      break;
  }
  return out;
}

std::vector<ArrayPtr> batch_column(const Table& t, size_t c) { return t.column(c); }

}  // namespace

ArrayPtr take(const MemoryContext& ctx, const Array& a, const std::vector<uint64_t>& rows) {
  std::vector<RowRef> rr(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= a.length) fail(ErrorCode::OutOfRange, fmt::format("take row {} of {}", rows[i], a.length));
    rr[i] = RowRef{0, rows[i]};
  }
  // Non-owning alias: the caller keeps `a` alive for the call.
  ArrayPtr alias(std::shared_ptr<const Array>{}, &a);
  return take_rows(ctx, {alias}, rr);
}

Table slice_table(const MemoryContext& ctx, const Table& t, uint64_t start, uint64_t len) {
  uint64_t total = t.nrows();
  if (start > total || len > total - start)
    fail(ErrorCode::OutOfRange, fmt::format("slice [{}, +{}) of {} rows", start, len, total));
  Table out;
  out.schema = t.schema;
  uint64_t base = 0, end = start + len;
  for (auto& b : t.batches) {
    uint64_t lo = std::max(start, base), hi = std::min(end, base + b.nrows);
    if (lo < hi) {
      if (lo == base && hi == base + b.nrows) out.batches.push_back(b);
      else out.batches.push_back(RecordBatch{hi - lo, slice_batch_columns(ctx, b, lo - base, hi - lo)});
    }
    base += b.nrows;
  }
  return out;
}

Table project(const Table& t, const std::vector<std::string>& names) {
  std::vector<size_t> idx;
  std::set<std::string> seen;
  for (auto& n : names) {
    idx.push_back(t.schema.index_of(n));
    if (!seen.insert(n).second) fail(ErrorCode::SchemaMismatch, fmt::format("column '{}' selected twice", n));
  }
  Table out;
  for (auto i : idx) out.schema.fields.push_back(t.schema.fields[i]);
  for (auto& b : t.batches) {
    RecordBatch nb{b.nrows, {}};
    for (auto i : idx) nb.columns.push_back(b.columns[i]);
    out.batches.push_back(std::move(nb));
  }
  return out;
}

Table concat(const MemoryContext& ctx, const std::vector<Table>& ts, Axis axis) {
  if (ts.empty()) fail(ErrorCode::InvalidArgument, "concat of no tables");
  Table out;
  if (axis == Axis::Vertical) {
    out.schema = ts[0].schema;
    for (auto& t : ts) {
      if (!t.schema.compatible(ts[0].schema))
        fail(ErrorCode::SchemaMismatch, "vertical concat of tables with different schemas");
      for (size_t i = 0; i < t.schema.size(); ++i) out.schema.fields[i].nullable |= t.schema.fields[i].nullable;
      for (auto& b : t.batches) out.batches.push_back(b);
    }
    return out;
  }
  uint64_t rows = ts[0].nrows();
  std::set<uint64_t> cuts{0, rows};
  for (auto& t : ts) {
    if (t.nrows() != rows)
      fail(ErrorCode::SchemaMismatch, fmt::format("horizontal concat: {} rows vs {}", t.nrows(), rows));
    for (auto& f : t.schema.fields) {
      if (out.schema.contains(f.name))
        fail(ErrorCode::SchemaMismatch, fmt::format("horizontal concat: duplicate column '{}'", f.name));
      out.schema.fields.push_back(f);
    }
    uint64_t base = 0;
    for (auto& b : t.batches) cuts.insert(base += b.nrows);
  }
  // Split every input at the union of batch boundaries; pieces are views.
  std::vector<uint64_t> cv(cuts.begin(), cuts.end());
  for (size_t k = 0; k + 1 < cv.size(); ++k) {
    uint64_t lo = cv[k], hi = cv[k + 1];
    RecordBatch nb{hi - lo, {}};
    for (auto& t : ts) {
      auto piece = slice_table(ctx, t, lo, hi - lo);
      for (auto& a : piece.batches.at(0).columns) nb.columns.push_back(a);
    }
    out.batches.push_back(std::move(nb));
  }
  return out;
}

Table add_columns(const MemoryContext& ctx, const Table& t, const std::vector<Expr>& exprs, bool materialize_all) {
  Table out;
  out.schema = t.schema;
  std::vector<std::pair<size_t, size_t>> operands;
  for (auto& e : exprs) {
    if (out.schema.contains(e.name)) fail(ErrorCode::SchemaMismatch, fmt::format("column '{}' exists", e.name));
    size_t l = out.schema.index_of(e.lhs), r = out.schema.index_of(e.rhs);
    auto &fl = out.schema.fields[l], &fr = out.schema.fields[r];
    if (!is_numeric(fl.type) || !is_numeric(fr.type) || fl.dict || fr.dict)
      fail(ErrorCode::TypeError, fmt::format("expression {} over non-numeric column", e.name));
    DType rt = fl.type == DType::Int64 && fr.type == DType::Int64 ? DType::Int64 : DType::Float64;
    out.schema.fields.push_back(Field{e.name, rt, false, fl.nullable || fr.nullable});
    operands.emplace_back(l, r);
  }
  for (auto& b : t.batches) {
    RecordBatch nb{b.nrows, {}};
    for (auto& a : b.columns) nb.columns.push_back(materialize_all ? copy_array(ctx, *a) : a);
    for (size_t k = 0; k < exprs.size(); ++k) {
      auto [li, ri] = operands[k];
      ArrayReader L(*nb.columns[li]), R(*nb.columns[ri]);
      DType rt = out.schema.fields[t.ncols() + k].type;
      int64_t n = int64_t(b.nrows);
      auto res = std::make_shared<Array>();
      res->dtype = rt;
      res->length = b.nrows;
      WritableBuffer w(ctx, uint64_t(n) * 8);
      BinOp op = exprs[k].op;
      if (rt == DType::Int64) {
        auto dst = w.as<int64_t>();
#pragma omp parallel for schedule(static) if (n > kParallelRows)
        for (int64_t i = 0; i < n; ++i) {
          // Unsigned arithmetic gives defined wraparound.
          uint64_t x = uint64_t(L.i64(i)), y = uint64_t(R.i64(i));
          dst[i] = int64_t(op == BinOp::Add ? x + y : op == BinOp::Sub ? x - y : x * y);
        }
      } else {
        auto dst = w.as<double>();
#pragma omp parallel for schedule(static) if (n > kParallelRows)
        for (int64_t i = 0; i < n; ++i) {
          double x = L.number(i), y = R.number(i);
          dst[i] = op == BinOp::Add ? x + y : op == BinOp::Sub ? x - y : x * y;
        }
      }
      res->values = w.seal();
      std::vector<bool> valid;
      if (L.array().validity || R.array().validity) {
        valid.resize(b.nrows);
        for (uint64_t i = 0; i < b.nrows; ++i) valid[i] = !L.is_null(i) && !R.is_null(i);
        res->null_count = uint64_t(std::count(valid.begin(), valid.end(), false));
        if (res->null_count) {
          WritableBuffer vw(ctx, bitmap_bytes(b.nrows));
          std::memset(vw.data(), 0, vw.size());
          for (uint64_t i = 0; i < b.nrows; ++i)
            if (valid[i]) set_bit(vw.data(), i, true);
          res->validity = vw.seal();
        }
      }
      nb.columns.push_back(res);
    }
    out.batches.push_back(std::move(nb));
  }
  return out;
}

Table filter(const MemoryContext& ctx, const Table& t, const Mask& m) {
  if (m.length != t.nrows())
    fail(ErrorCode::LengthMismatch, fmt::format("mask of {} rows for table of {}", m.length, t.nrows()));
  Table out;
  out.schema = t.schema;
  auto bits = m.bits.pin();
  uint64_t base = 0;
  for (auto& b : t.batches) {
    std::vector<RowRef> rows;
    for (uint64_t i = 0; i < b.nrows; ++i)
      if (bit_at(bits.data(), base + i)) rows.push_back(RowRef{0, i});
    base += b.nrows;
    if (rows.empty()) continue;
    RecordBatch nb{rows.size(), {}};
    for (auto& a : b.columns) nb.columns.push_back(take_rows(ctx, {a}, rows));
    out.batches.push_back(std::move(nb));
  }
  return out;
}

Table sort_by(const MemoryContext& ctx, const Table& t, const std::string& col, bool ascending) {
  size_t c = t.schema.index_of(col);
  Table out;
  out.schema = t.schema;
  std::vector<RowRef> rows;
  auto chunks = batch_column(t, c);
  std::vector<std::unique_ptr<ArrayReader>> rd;
  for (uint32_t k = 0; k < chunks.size(); ++k) {
    rd.push_back(std::make_unique<ArrayReader>(*chunks[k]));
    for (uint64_t i = 0; i < chunks[k]->length; ++i) rows.push_back(RowRef{k, i});
  }
  if (rows.empty()) return out;
  DType dt = t.schema.fields[c].type;
  auto less = [&](const RowRef& x, const RowRef& y) {
    auto &a = *rd[x.chunk], &b = *rd[y.chunk];
    bool nx = a.is_null(x.row), ny = b.is_null(y.row);
    if (nx || ny) return !nx && ny;  // nulls last
    bool lt, gt;
    switch (dt) {
      case DType::Int64:
        lt = a.i64(x.row) < b.i64(y.row);
        gt = b.i64(y.row) < a.i64(x.row);
        break;
      case DType::Float64:
        lt = less_double(a.f64(x.row), b.f64(y.row));
        gt = less_double(b.f64(y.row), a.f64(x.row));
        break;
      case DType::Utf8:
        lt = a.str(x.row) < b.str(y.row);
        gt = b.str(y.row) < a.str(x.row);
        break;
      default:
        lt = a.boolean(x.row) < b.boolean(y.row);
        gt = b.boolean(y.row) < a.boolean(x.row);
        break;
    }
    return ascending ? lt : gt;
  };
  std::stable_sort(rows.begin(), rows.end(), less);
  RecordBatch nb{rows.size(), {}};
  for (size_t k = 0; k < t.ncols(); ++k) nb.columns.push_back(take_rows(ctx, batch_column(t, k), rows));
  out.batches.push_back(std::move(nb));
  return out;
}

Table materialize(const MemoryContext& ctx, const Table& t) {
  Table out;
  out.schema = t.schema;
  for (auto& b : t.batches) {
    RecordBatch nb{b.nrows, {}};
    for (auto& a : b.columns) nb.columns.push_back(copy_array(ctx, *a));
    out.batches.push_back(std::move(nb));
  }
  return out;
}

}  // namespace zsim::col
