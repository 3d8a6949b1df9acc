#include "zsim/reference/reference.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>

#include <fmt/format.h>

#include "zsim/util/error.hpp"

namespace zsim::ref {

size_t RowTable::index_of(const std::string& name) const {
  for (size_t i = 0; i < fields.size(); ++i)
    if (fields[i].name == name) return i;
  fail(ErrorCode::UnknownColumn, name);
}

namespace {
void require_new(const RowTable& t, const std::string& name) {
  for (auto& f : t.fields)
    if (f.name == name) fail(ErrorCode::SchemaMismatch, "column exists: " + name);
}
}  // namespace

RowTable from_table(const col::Table& t) {
  RowTable r;
  for (auto& f : t.schema.fields) r.fields.push_back(RefField{f.name, f.type});
  auto cols = col::table_columns(t);
  r.rows.resize(t.nrows());
  for (size_t i = 0; i < r.rows.size(); ++i)
    for (auto& c : cols) r.rows[i].push_back(c[i]);
  return r;
}

namespace {

bool cell_equal(const Value& e, const Value& a, double tol) {
  if (tol > 0 && std::holds_alternative<double>(e) && std::holds_alternative<double>(a)) {
    double x = std::get<double>(e), y = std::get<double>(a);
    if (std::isnan(x) || std::isnan(y)) return std::isnan(x) && std::isnan(y);
    return std::fabs(x - y) <= tol * std::max({1.0, std::fabs(x), std::fabs(y)});
  }
  return col::value_equal(e, a);
}

bool is_null(const Value& v) { return std::holds_alternative<std::monostate>(v); }

double as_double(const Value& v) {
  if (auto p = std::get_if<int64_t>(&v)) return double(*p);
  return std::get<double>(v);
}

// Strict weak order with nulls last; NaN after all numbers.
int compare(const Value& a, const Value& b) {
  bool na = is_null(a), nb = is_null(b);
  if (na || nb) return na == nb ? 0 : (na ? 1 : -1);
  if (auto x = std::get_if<double>(&a)) {
    double y = std::get<double>(b);
    bool xn = std::isnan(*x), yn = std::isnan(y);
    if (xn || yn) return xn == yn ? 0 : (xn ? 1 : -1);
    return *x < y ? -1 : (y < *x ? 1 : 0);
  }
  return a < b ? -1 : (b < a ? 1 : 0);
}

}  // namespace

bool equal(const RowTable& e, const col::Table& actual, double tol, std::string* why) {
  auto say = [&](std::string msg) {
    if (why) *why = std::move(msg);
    return false;
  };
  if (e.fields.size() != actual.ncols())
    return say(fmt::format("{} columns expected, got {}", e.fields.size(), actual.ncols()));
  for (size_t c = 0; c < e.fields.size(); ++c) {
    auto& f = actual.schema.fields[c];
    if (f.name != e.fields[c].name || f.type != e.fields[c].type)
      return say(fmt::format("column {} is {}:{}, expected {}:{}", c, f.name, col::to_string(f.type),
                             e.fields[c].name, col::to_string(e.fields[c].type)));
  }
  if (e.rows.size() != actual.nrows())
    return say(fmt::format("{} rows expected, got {}", e.rows.size(), actual.nrows()));
  auto cols = col::table_columns(actual);
  for (size_t r = 0; r < e.rows.size(); ++r)
    for (size_t c = 0; c < e.fields.size(); ++c)
      if (!cell_equal(e.rows[r][c], cols[c][r], tol))
        return say(fmt::format("row {} column {}: expected {}, got {}", r, e.fields[c].name,
                               col::to_string(e.rows[r][c]), col::to_string(cols[c][r])));
  return true;
}

RowTable slice(const RowTable& t, uint64_t start, uint64_t len) {
  RowTable r{t.fields, {}};
  for (uint64_t i = start; i < start + len; ++i) r.rows.push_back(t.rows.at(i));
  return r;
}

RowTable project(const RowTable& t, const std::vector<std::string>& names) {
  RowTable r;
  std::vector<size_t> idx;
  for (auto& n : names) {
    idx.push_back(t.index_of(n));
    r.fields.push_back(t.fields[idx.back()]);
  }
  for (auto& row : t.rows) {
    std::vector<Value> out;
    for (auto i : idx) out.push_back(row[i]);
    r.rows.push_back(std::move(out));
  }
  return r;
}

RowTable concat_vertical(const RowTable& a, const RowTable& b) {
  RowTable r = a;
  for (auto& row : b.rows) r.rows.push_back(row);
  return r;
}

RowTable concat_horizontal(const RowTable& a, const RowTable& b) {
  if (a.rows.size() != b.rows.size()) fail(ErrorCode::SchemaMismatch, "row counts differ");
  RowTable r = a;
  for (auto& f : b.fields) {
    require_new(r, f.name);
    r.fields.push_back(f);
  }
  for (size_t i = 0; i < r.rows.size(); ++i)
    for (auto& v : b.rows.at(i)) r.rows[i].push_back(v);
  return r;
}

RowTable add_columns(const RowTable& t, const std::vector<col::Expr>& exprs) {
  RowTable r = t;
  for (auto& e : exprs) {
    require_new(r, e.name);
    size_t l = r.index_of(e.lhs), rr = r.index_of(e.rhs);
    bool ints = r.fields[l].type == DType::Int64 && r.fields[rr].type == DType::Int64;
    r.fields.push_back(RefField{e.name, ints ? DType::Int64 : DType::Float64});
    for (auto& row : r.rows) {
      const Value &x = row[l], &y = row[rr];
      if (is_null(x) || is_null(y)) {
        row.emplace_back(std::monostate{});
      } else if (ints) {
        uint64_t a = uint64_t(std::get<int64_t>(x)), b = uint64_t(std::get<int64_t>(y));
        uint64_t v = e.op == col::BinOp::Add ? a + b : e.op == col::BinOp::Sub ? a - b : a * b;
        row.emplace_back(int64_t(v));
      } else {
        double a = as_double(x), b = as_double(y);
        row.emplace_back(e.op == col::BinOp::Add ? a + b : e.op == col::BinOp::Sub ? a - b : a * b);
      }
    }
  }
  return r;
}

RowTable filter(const RowTable& t, const std::vector<bool>& keep) {
  RowTable r{t.fields, {}};
  for (size_t i = 0; i < t.rows.size(); ++i)
    if (keep.at(i)) r.rows.push_back(t.rows[i]);
  return r;
}

RowTable sort(const RowTable& t, const std::string& col, bool ascending) {
  size_t c = t.index_of(col);
  // Insertion sort: stable by construction.
  RowTable r{t.fields, {}};
  for (auto& row : t.rows) {
    size_t pos = r.rows.size();
    while (pos > 0) {
      int cmp = compare(r.rows[pos - 1][c], row[c]);
      bool nulls = is_null(r.rows[pos - 1][c]) || is_null(row[c]);
      bool after = nulls ? cmp > 0 : (ascending ? cmp > 0 : cmp < 0);
      if (!after) break;
      --pos;
    }
    r.rows.insert(r.rows.begin() + long(pos), row);
  }
  return r;
}

std::string upper_utf8(const std::string& s) {
  // Decode to code points, map, re-encode.
  std::vector<uint32_t> cps;
  for (size_t i = 0; i < s.size();) {
    uint8_t c = uint8_t(s[i]);
    uint32_t cp;
    size_t n;
    if (c < 0x80) cp = c, n = 1;
    else if ((c >> 5) == 6) cp = c & 0x1F, n = 2;
    else if ((c >> 4) == 14) cp = c & 0x0F, n = 3;
    else cp = c & 0x07, n = 4;
    for (size_t k = 1; k < n && i + k < s.size(); ++k) cp = (cp << 6) | (uint8_t(s[i + k]) & 0x3F);
    cps.push_back(cp);
    i += n;
  }
  std::string out;
  for (uint32_t cp : cps) {
    if (cp >= 'a' && cp <= 'z') cp -= 32;
    else if (cp == 0xDF) cp = 0x1E9E;
    else if (cp == 0xFF) cp = 0x178;
    else if (cp >= 0xE0 && cp <= 0xFE && cp != 0xF7) cp -= 0x20;
    if (cp < 0x80) {
      out += char(cp);
    } else if (cp < 0x800) {
      out += char(0xC0 | (cp >> 6));
      out += char(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
      out += char(0xE0 | (cp >> 12));
      out += char(0x80 | ((cp >> 6) & 0x3F));
      out += char(0x80 | (cp & 0x3F));
    } else {
      out += char(0xF0 | (cp >> 18));
      out += char(0x80 | ((cp >> 12) & 0x3F));
      out += char(0x80 | ((cp >> 6) & 0x3F));
      out += char(0x80 | (cp & 0x3F));
    }
  }
  return out;
}

RowTable upper(const RowTable& t, const std::string& col) {
  size_t c = t.index_of(col);
  RowTable r = t;
  for (auto& row : r.rows)
    if (auto s = std::get_if<std::string>(&row[c])) *s = upper_utf8(*s);
  return r;
}

RowTable matmul(const RowTable& t, const col::MatMul& m) {
  std::vector<size_t> idx;
  for (size_t i = 0; i < t.fields.size(); ++i)
    if (t.fields[i].type == DType::Int64 || t.fields[i].type == DType::Float64) idx.push_back(i);
  RowTable r;
  for (uint64_t j = 0; j < m.cols; ++j) r.fields.push_back(RefField{fmt::format("mm{}", j), DType::Float64});
  for (auto& row : t.rows) {
    std::vector<Value> out;
    for (uint64_t j = 0; j < m.cols; ++j) {
      double acc = 0;
      for (uint64_t q = 0; q < idx.size(); ++q) {
        double x = is_null(row[idx[q]]) ? 0.0 : as_double(row[idx[q]]);
        acc += x * m.values[q * m.cols + j];
      }
      out.emplace_back(acc);
    }
    r.rows.push_back(std::move(out));
  }
  return r;
}

RowTable ols(const RowTable& t, const col::Ols& o) {
  require_new(t, o.output);
  std::vector<size_t> fi;
  for (auto& f : o.features) fi.push_back(t.index_of(f));
  size_t li = t.index_of(o.label);
  size_t p = fi.size() + 1;
  std::vector<std::vector<double>> A(p, std::vector<double>(p + 1, 0.0));
  for (size_t g = 0; g < t.rows.size(); g += 2) {
    auto& row = t.rows[g];
    bool skip = is_null(row[li]);
    for (auto i : fi) skip |= is_null(row[i]);
    if (skip) continue;
    std::vector<double> x{1.0};
    for (auto i : fi) x.push_back(as_double(row[i]));
    double y = as_double(row[li]);
    for (size_t a = 0; a < p; ++a) {
      for (size_t b = 0; b < p; ++b) A[a][b] += x[a] * x[b];
      A[a][p] += x[a] * y;
    }
  }
  // Gauss-Jordan with partial pivoting.
  double scale = 0;
  for (auto& rowv : A)
    for (size_t b = 0; b < p; ++b) scale = std::max(scale, std::fabs(rowv[b]));
  for (size_t k = 0; k < p; ++k) {
    size_t piv = k;
    for (size_t a = k + 1; a < p; ++a)
      if (std::fabs(A[a][k]) > std::fabs(A[piv][k])) piv = a;
    if (std::fabs(A[piv][k]) <= 1e-12 * std::max(scale, 1.0)) fail(ErrorCode::SingularSystem, "singular");
    std::swap(A[k], A[piv]);
    for (size_t a = 0; a < p; ++a) {
      if (a == k) continue;
      double f = A[a][k] / A[k][k];
      for (size_t b = k; b <= p; ++b) A[a][b] -= f * A[k][b];
    }
  }
  std::vector<double> beta(p);
  for (size_t k = 0; k < p; ++k) beta[k] = A[k][p] / A[k][k];
  RowTable r{t.fields, {}};
  r.fields.push_back(RefField{o.output, DType::Float64});
  for (size_t g = 1; g < t.rows.size(); g += 2) {
    auto row = t.rows[g];
    bool null = false;
    double v = beta[0];
    for (size_t j = 0; j < fi.size(); ++j) {
      null |= is_null(row[fi[j]]);
      if (!null) v += beta[j + 1] * as_double(row[fi[j]]);
    }
    row.push_back(null ? Value{} : Value{v});
    r.rows.push_back(std::move(row));
  }
  return r;
}

col::Scalar sum_all(const RowTable& t) {
  col::Scalar s;
  uint64_t acc = 0;
  for (auto& row : t.rows)
    for (auto& v : row) {
      if (auto i = std::get_if<int64_t>(&v)) acc += uint64_t(*i);
      else if (auto d = std::get_if<double>(&v)) s.float_sum += *d;
    }
  s.int_sum = int64_t(acc);
  return s;
}

RefDict dict_encode(const std::vector<Value>& column) {
  RefDict d;
  for (auto& v : column) {
    if (is_null(v)) {
      d.codes.push_back(0);
      continue;
    }
    auto& s = std::get<std::string>(v);
    auto it = std::find(d.dictionary.begin(), d.dictionary.end(), s);
    d.codes.push_back(int32_t(it - d.dictionary.begin()));
    if (it == d.dictionary.end()) d.dictionary.push_back(s);
  }
  return d;
}

}  // namespace zsim::ref
