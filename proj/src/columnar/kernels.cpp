#include "zsim/columnar/kernels.hpp"

#include <algorithm>
#include <cstring>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "zsim/columnar/build.hpp"
#include "zsim/columnar/ops.hpp"
#include "zsim/util/error.hpp"

namespace zsim::col {

namespace {

constexpr int64_t kParallelRows = 4096;
constexpr int64_t kBlockRows = 4096;  // fixed reduction blocks keep sums thread-count independent

uint64_t upper_len(std::string_view s) {
  uint64_t n = s.size();
  for (size_t i = 0; i + 1 < s.size(); ++i)
    if (uint8_t(s[i]) == 0xC3 && uint8_t(s[i + 1]) == 0x9F) ++n;  // U+00DF grows to 3 bytes
  return n;
}

void upper_into(std::string_view s, char* dst) {
  size_t i = 0;
  while (i < s.size()) {
    uint8_t c = uint8_t(s[i]);
    if (c >= 'a' && c <= 'z') {
      *dst++ = char(c - 32);
      ++i;
    } else if (c == 0xC3 && i + 1 < s.size()) {
      uint8_t d = uint8_t(s[i + 1]);
      if (d == 0x9F) {
        *dst++ = char(0xE1);
        *dst++ = char(0xBA);
        *dst++ = char(0x9E);
      } else if (d == 0xBF) {
        *dst++ = char(0xC5);
        *dst++ = char(0xB8);
      } else if (d >= 0xA0 && d <= 0xBE && d != 0xB7) {
        *dst++ = char(0xC3);
        *dst++ = char(d - 0x20);
      } else {
        *dst++ = char(c);
        *dst++ = char(d);
      }
      i += 2;
    } else {
      *dst++ = char(c);
      ++i;
    }
  }
}

ArrayPtr upper_array(const MemoryContext& ctx, const Array& a) {
  ArrayReader r(a);
  int64_t n = int64_t(a.length);
  auto out = std::make_shared<Array>();
  out->dtype = DType::Utf8;
  out->length = a.length;
  out->validity = window_validity(ctx, a, 0, a.length, &out->null_count);
  WritableBuffer off(ctx, uint64_t(n + 1) * 8);
  auto o = off.as<int64_t>();
  std::vector<uint64_t> lens(a.length);
#pragma omp parallel for schedule(static) if (n > kParallelRows)
  for (int64_t i = 0; i < n; ++i) lens[i] = r.is_null(i) ? 0 : upper_len(r.str(i));
  int64_t total = 0;
  for (int64_t i = 0; i < n; ++i) {
    o[i] = total;
    total += int64_t(lens[i]);
  }
  o[n] = total;
  WritableBuffer val(ctx, uint64_t(total));
  auto dst = reinterpret_cast<char*>(val.data());
#pragma omp parallel for schedule(static) if (n > kParallelRows)
  for (int64_t i = 0; i < n; ++i)
    if (lens[i]) upper_into(r.str(i), dst + o[i]);
  out->offsets = off.seal();
  out->values = val.seal();
  return out;
}

Table run_upper(const MemoryContext& ctx, const Table& t, const Upper& u) {
  size_t c = t.schema.index_of(u.column);
  if (t.schema.fields[c].type != DType::Utf8)
    fail(ErrorCode::TypeError, fmt::format("upper on non-Utf8 column '{}'", u.column));
  Table out = t;
  out.schema.fields[c].dict = false;
  for (auto& b : out.batches) b.columns[c] = upper_array(ctx, *b.columns[c]);
  return out;
}

std::vector<size_t> numeric_columns(const Table& t) {
  std::vector<size_t> idx;
  for (size_t i = 0; i < t.ncols(); ++i)
    if (is_numeric(t.schema.fields[i].type)) idx.push_back(i);
  return idx;
}

Table run_matmul(const MemoryContext& ctx, const Table& t, const MatMul& m) {
  auto idx = numeric_columns(t);
  if (idx.size() != m.rows || m.values.size() != m.rows * m.cols || m.cols == 0)
    fail(ErrorCode::TypeError, fmt::format("matrix {}x{} does not fit {} numeric columns", m.rows, m.cols, idx.size()));
  Table out;
  for (uint64_t j = 0; j < m.cols; ++j) out.schema.fields.push_back(Field{fmt::format("mm{}", j), DType::Float64});
  for (auto& b : t.batches) {
    std::vector<std::unique_ptr<ArrayReader>> rd;
    for (auto i : idx) rd.push_back(std::make_unique<ArrayReader>(*b.columns[i]));
    std::vector<WritableBuffer> outs;
    std::vector<double*> dst;
    for (uint64_t j = 0; j < m.cols; ++j) {
      outs.emplace_back(ctx, b.nrows * 8);
      dst.push_back(outs.back().as<double>());
    }
    int64_t n = int64_t(b.nrows);
    uint64_t k = m.rows;
#pragma omp parallel for schedule(static) if (n > kParallelRows)
    for (int64_t r = 0; r < n; ++r) {
      for (uint64_t j = 0; j < m.cols; ++j) {
        double acc = 0;
        for (uint64_t q = 0; q < k; ++q) {
          double x = rd[q]->is_null(r) ? 0.0 : rd[q]->number(r);
          acc += x * m.values[q * m.cols + j];
        }
        dst[j][r] = acc;
      }
    }
    RecordBatch nb{b.nrows, {}};
    for (auto& w : outs) {
      auto a = std::make_shared<Array>();
      a->dtype = DType::Float64;
      a->length = b.nrows;
      a->values = w.seal();
      nb.columns.push_back(a);
    }
    out.batches.push_back(std::move(nb));
  }
  return out;
}

Table run_ols(const MemoryContext& ctx, const Table& t, const Ols& o) {
  std::vector<size_t> fi;
  for (auto& f : o.features) fi.push_back(t.schema.index_of(f));
  size_t li = t.schema.index_of(o.label);
  for (auto i : fi)
    if (!is_numeric(t.schema.fields[i].type)) fail(ErrorCode::TypeError, "OLS feature is not numeric");
  if (!is_numeric(t.schema.fields[li].type)) fail(ErrorCode::TypeError, "OLS label is not numeric");
  if (t.schema.contains(o.output)) fail(ErrorCode::SchemaMismatch, fmt::format("column '{}' exists", o.output));
  const size_t p = fi.size() + 1;

  // Flatten row access across batches.
  struct Chunk {
    std::vector<std::unique_ptr<ArrayReader>> f;
    std::unique_ptr<ArrayReader> y;
    uint64_t base;
  };
  std::vector<Chunk> chunks;
  uint64_t base = 0;
  for (auto& b : t.batches) {
    Chunk c;
    for (auto i : fi) c.f.push_back(std::make_unique<ArrayReader>(*b.columns[i]));
    c.y = std::make_unique<ArrayReader>(*b.columns[li]);
    c.base = base;
    base += b.nrows;
    chunks.push_back(std::move(c));
  }
  const uint64_t total = base;

  // Normal equations accumulated per fixed block, summed in block order.
  int64_t nblocks = int64_t((total + kBlockRows - 1) / kBlockRows);
  std::vector<Eigen::MatrixXd> xtx(size_t(nblocks), Eigen::MatrixXd::Zero(p, p));
  std::vector<Eigen::VectorXd> xty(size_t(nblocks), Eigen::VectorXd::Zero(p));
#pragma omp parallel for schedule(static) if (nblocks > 1)
  for (int64_t blk = 0; blk < nblocks; ++blk) {
    uint64_t lo = uint64_t(blk) * kBlockRows, hi = std::min<uint64_t>(total, lo + kBlockRows);
    size_t ci = 0;
    Eigen::VectorXd x(p);
    for (uint64_t g = lo; g < hi; ++g) {
      if (g % 2) continue;
      while (g >= chunks[ci].base + t.batches[ci].nrows) ++ci;
      auto& c = chunks[ci];
      uint64_t r = g - c.base;
      bool skip = c.y->is_null(r);
      for (auto& f : c.f) skip |= f->is_null(r);
      if (skip) continue;
      x[0] = 1.0;
      for (size_t j = 0; j < fi.size(); ++j) x[j + 1] = c.f[j]->number(r);
      xtx[blk].noalias() += x * x.transpose();
      xty[blk].noalias() += x * c.y->number(r);
    }
  }
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p);
  for (int64_t blk = 0; blk < nblocks; ++blk) {
    A += xtx[blk];
    rhs += xty[blk];
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  if (!lu.isInvertible()) fail(ErrorCode::SingularSystem, "normal matrix is singular");
  Eigen::VectorXd beta = lu.solve(rhs);

  std::vector<bool> odd(total);
  for (uint64_t g = 0; g < total; ++g) odd[g] = g % 2;
  Table out = filter(ctx, t, make_mask(ctx, odd));
  out.schema.fields.push_back(Field{o.output, DType::Float64, false, false});
  std::vector<double> pred;
  std::vector<bool> valid;
  for (auto& c : chunks) {
    uint64_t n = t.batches[&c - chunks.data()].nrows;
    for (uint64_t r = 0; r < n; ++r) {
      if ((c.base + r) % 2 == 0) continue;
      bool null = false;
      double v = beta[0];
      for (size_t j = 0; j < fi.size(); ++j) {
        null |= c.f[j]->is_null(r);
        if (!null) v += beta[Eigen::Index(j + 1)] * c.f[j]->number(r);
      }
      pred.push_back(null ? 0.0 : v);
      valid.push_back(!null);
    }
  }
  uint64_t pos = 0;
  for (auto& b : out.batches) {
    std::vector<double> pv(pred.begin() + pos, pred.begin() + pos + b.nrows);
    std::vector<bool> vv(valid.begin() + pos, valid.begin() + pos + b.nrows);
    auto arr = make_float64(ctx, pv, vv);
    if (arr->null_count) out.schema.fields.back().nullable = true;
    b.columns.push_back(arr);
    pos += b.nrows;
  }
  return out;
}

Scalar run_sum(const Table& t) {
  Scalar s;
  for (auto& b : t.batches) {
    for (size_t c = 0; c < t.ncols(); ++c) {
      auto& f = t.schema.fields[c];
      if (!is_numeric(f.type)) continue;
      ArrayReader r(*b.columns[c]);
      int64_t n = int64_t(b.nrows);
      if (f.type == DType::Int64) {
        uint64_t acc = 0;
#pragma omp parallel for reduction(+ : acc) schedule(static) if (n > kParallelRows)
        for (int64_t i = 0; i < n; ++i)
          if (!r.is_null(i)) acc += uint64_t(r.i64(i));
        s.int_sum = int64_t(uint64_t(s.int_sum) + acc);
      } else {
        int64_t nblocks = (n + kBlockRows - 1) / kBlockRows;
        std::vector<double> part(size_t(nblocks), 0.0);
#pragma omp parallel for schedule(static) if (nblocks > 1)
        for (int64_t blk = 0; blk < nblocks; ++blk) {
          double acc = 0;
          for (int64_t i = blk * kBlockRows; i < std::min(n, (blk + 1) * kBlockRows); ++i)
            if (!r.is_null(i)) acc += r.f64(i);
          part[blk] = acc;
        }
        for (double v : part) s.float_sum += v;
      }
    }
  }
  return s;
}

}  // namespace

std::string utf8_upper(std::string_view s) {
  std::string out(upper_len(s), '\0');
  upper_into(s, out.data());
  return out;
}

KernelResult kernel(const MemoryContext& ctx, const Table& t, const KernelKind& kind) {
  struct V {
    const MemoryContext& ctx;
    const Table& t;
    KernelResult operator()(const Upper& u) const { return run_upper(ctx, t, u); }
    KernelResult operator()(const MatMul& m) const { return run_matmul(ctx, t, m); }
    KernelResult operator()(const Ols& o) const { return run_ols(ctx, t, o); }
    KernelResult operator()(const SumAll&) const { return run_sum(t); }
  };
  return std::visit(V{ctx, t}, kind);
}

}  // namespace zsim::col
