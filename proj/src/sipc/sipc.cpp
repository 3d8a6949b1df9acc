#include "zsim/sipc/sipc.hpp"

#include <algorithm>
#include <cstring>
#include <functional>
#include <map>
#include <set>

#include <fmt/format.h>

#include "zsim/columnar/build.hpp"
#include "zsim/util/error.hpp"

namespace zsim::sipc {

using col::Array;
using col::Buffer;
using mem::SegRef;

std::optional<SegRef> ShareMap::resolve(const Buffer& b) const {
  if (!b) return std::nullopt;
  auto it = entries_.find(b.id());
  if (it == entries_.end()) return std::nullopt;
  return SegRef{it->second.segment, it->second.offset + b.offset(), b.size()};
}

void ShareMap::merge(const ShareMap& o) {
  for (auto& [k, v] : o.entries_) entries_[k] = v;
}

std::vector<mem::SegmentId> SharingReport::segments() const {
  std::vector<mem::SegmentId> out;
  for (auto& r : refs)
    if (out.empty() || out.back() != r.segment) out.push_back(r.segment);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

uint64_t SharingReport::referenced_bytes() const {
  uint64_t n = 0;
  for (auto& r : refs) n += r.length;
  return n;
}

std::vector<mem::SegmentId> StoredOutput::segments() const {
  auto out = report.segments();
  if (sink.length && !std::binary_search(out.begin(), out.end(), sink.segment)) {
    out.push_back(sink.segment);
    std::sort(out.begin(), out.end());
  }
  return out;
}

namespace {

class Writer {
 public:
  Writer(mem::Store& store, const ShareMap* sm, mem::AccountId account, const WriteOptions& opts)
      : store_(store), sm_(opts.baseline ? nullptr : sm), account_(account), opts_(opts) {
    threshold_ = opts.inline_threshold ? opts.inline_threshold : store.page_size();
  }

  FileModel run(const col::Table& t) {
    FileModel f;
    f.flags = opts_.baseline ? kFlagBaseline : 0;
    f.schema = t.schema;
    std::vector<uint64_t> last_dict(t.ncols(), 0);
    for (auto& b : t.batches) {
      for (size_t c = 0; c < t.ncols(); ++c) {
        auto& a = *b.columns[c];
        if (!a.is_dict() || a.dict->dict_id == last_dict[c]) continue;
        Message m;
        m.type = MsgType::DictBatch;
        m.dict_id = uint32_t(c);
        m.arrays.push_back(describe(*a.dict->dictionary, c, true));
        f.messages.push_back(std::move(m));
        last_dict[c] = a.dict->dict_id;
      }
      Message m;
      for (size_t c = 0; c < t.ncols(); ++c) m.arrays.push_back(describe(*b.columns[c], c, false));
      f.messages.push_back(std::move(m));
    }
    return f;
  }

  SharingReport report(const FileModel& f) {
    SharingReport r = inspect_model(f);
    for (auto& [c, id] : column_segments_) r.new_segments.push_back(id);
    if (dict_segment_) r.new_segments.push_back(*dict_segment_);
    std::sort(r.new_segments.begin(), r.new_segments.end());
    for (auto id : r.new_segments) r.new_segment_bytes += store_.segment(id).len;
    return r;
  }

  static SharingReport inspect_model(const FileModel& f) {
    std::set<SegRef> refs;
    SharingReport r;
    for (auto& m : f.messages)
      for (auto& a : m.arrays)
        for (auto& b : a.buffers) {
          if (b.is_inline) r.inline_bytes += b.length();
          else refs.insert(b.ref);
        }
    r.refs.assign(refs.begin(), refs.end());
    return r;
  }

 private:
  ArrayDesc describe(const Array& a, size_t column, bool dictionary) {
    ArrayDesc d;
    d.type = a.dtype;
    d.length = a.length;
    d.null_count = a.null_count;
    d.slice_offset = a.is_dict() ? 0 : a.slice_offset;
    if (a.validity) d.buffers.push_back(emit(Role::Validity, a.validity, column, dictionary));
    if (a.is_dict()) {
      if (a.dict->codes) d.buffers.push_back(emit(Role::Codes, a.dict->codes, column, dictionary));
    } else {
      if (a.offsets) d.buffers.push_back(emit(Role::Offsets, a.offsets, column, dictionary));
      if (a.values) d.buffers.push_back(emit(Role::Values, a.values, column, dictionary));
    }
    return d;
  }

  BufferDesc emit(Role role, const Buffer& b, size_t column, bool dictionary) {
    if (!opts_.baseline) {
      if (sm_)
        if (auto r = sm_->resolve(b)) return BufferDesc::make_ref(role, *r);
      if (auto it = local_.find(b.id()); it != local_.end())
        return BufferDesc::make_ref(role, SegRef{it->second.segment, it->second.offset + b.offset(), b.size()});
    }
    if (opts_.baseline || b.size() < threshold_) {
      auto bytes = b.copy_bytes();
      return BufferDesc::make_inline(role, std::move(bytes));
    }
    auto core = b.core();
    mem::SegmentId seg = segment_for(column, dictionary);
    SegRef whole;
    if (core->backing().kind == col::BackingKind::Anonymous) {
      whole = store_.deanon(seg, core->region(), 0, core->size());
      core->mark_deanonymized(whole);
      local_[core->id()] = whole;
      return BufferDesc::make_ref(role, SegRef{whole.segment, whole.offset + b.offset(), b.size()});
    }
    // Mapped bytes we cannot reference: copy the window, then de-anonymize.
    auto copy = col::make_buffer(col::MemoryContext{&store_, account_}, b.copy_bytes());
    store_.record_copy(b.size());
    whole = store_.deanon(seg, copy.core()->region(), 0, copy.size());
    copy.core()->mark_deanonymized(whole);
    return BufferDesc::make_ref(role, whole);
  }

  mem::SegmentId segment_for(size_t column, bool dictionary) {
    if (dictionary) {
      if (!dict_segment_) dict_segment_ = store_.new_segment(account_);
      return *dict_segment_;
    }
    auto it = column_segments_.find(column);
    if (it == column_segments_.end()) it = column_segments_.emplace(column, store_.new_segment(account_)).first;
    return it->second;
  }

  mem::Store& store_;
  const ShareMap* sm_;
  mem::AccountId account_;
  WriteOptions opts_;
  uint64_t threshold_;
  std::map<size_t, mem::SegmentId> column_segments_;
  std::optional<mem::SegmentId> dict_segment_;
  std::unordered_map<uint64_t, SegRef> local_;
};

[[noreturn]] void bad(const std::string& why) { fail(ErrorCode::ParseError, why); }

using InlineFn = std::function<Buffer(const BufferDesc&)>;

// Size checks only; payload bytes are not touched so reads stay lazy.
void check_shape(const Array& a) {
  auto need = [](const Buffer& b, uint64_t n, const char* what) {
    if (n && (!b || b.size() < n)) bad(fmt::format("{} buffer shorter than {} bytes", what, n));
  };
  if (bool(a.validity) != (a.null_count > 0) || a.null_count > a.length) bad("validity does not match null count");
  if (a.validity) need(a.validity, col::bitmap_bytes(a.length), "validity");
  if (a.is_dict()) {
    need(a.dict->codes, a.length * 4, "codes");
    return;
  }
  switch (a.dtype) {
    case col::DType::Int64:
    case col::DType::Float64: need(a.values, a.length * 8, "values"); break;
    case col::DType::Bool: need(a.values, col::bitmap_bytes(a.length), "values"); break;
    case col::DType::Utf8:
      if (!a.offsets) bad("Utf8 array without offsets");
      need(a.offsets, (a.slice_offset + a.length + 1) * 8, "offsets");
      break;
  }
  if (a.dtype != col::DType::Utf8 && a.slice_offset) bad("slice offset on fixed-width array");
}

ReadResult build(const FileModel& f, mem::Store& store, mem::AccountId reader, const InlineFn& inline_buffer) {
  ReadResult out;
  out.table.schema = f.schema;
  // One core per distinct range; each descriptor holds its own view.
  std::map<SegRef, std::vector<std::shared_ptr<mem::SegmentView>>> views;
  for (auto& m : f.messages)
    for (auto& a : m.arrays)
      for (auto& b : a.buffers)
        if (!b.is_inline) views[b.ref].push_back(store.map_ref(b.ref));
  std::map<SegRef, std::shared_ptr<col::BufferCore>> cores;
  for (auto& [ref, vs] : views) {
    auto core = col::BufferCore::mapped(&store, ref, reader, std::move(vs));
    out.sharemap.add(core->id(), ref);
    cores.emplace(ref, std::move(core));
  }
  auto buffer = [&](const BufferDesc& b) {
    if (b.is_inline) return inline_buffer(b);
    return Buffer(cores.at(b.ref), 0, b.ref.length);
  };
  auto make = [&](const ArrayDesc& d, const col::Field& field, const std::optional<col::DictData>& dict,
                  bool as_dictionary) {
    auto a = std::make_shared<Array>();
    if (d.type != field.type) bad(fmt::format("column '{}' type tag mismatch", field.name));
    a->dtype = d.type;
    a->length = d.length;
    a->null_count = d.null_count;
    a->slice_offset = d.slice_offset;
    bool want_codes = field.dict && !as_dictionary;
    for (auto& b : d.buffers) {
      Buffer* slot = nullptr;
      Buffer codes;
      switch (b.role) {
        case Role::Validity: slot = &a->validity; break;
        case Role::Offsets: slot = want_codes ? nullptr : &a->offsets; break;
        case Role::Values: slot = want_codes ? nullptr : &a->values; break;
        case Role::Codes:
          if (!want_codes) bad("codes buffer on a plain array");
          if (!dict) bad(fmt::format("column '{}' has codes but no dictionary", field.name));
          a->dict = col::DictData{dict->dict_id, dict->dictionary, buffer(b)};
          continue;
      }
      if (!slot) bad("plain buffer on a dictionary-encoded array");
      if (*slot) bad("duplicate buffer role");
      *slot = buffer(b);
    }
    if (want_codes && !a->dict) {
      if (!dict) bad(fmt::format("column '{}' has no dictionary", field.name));
      a->dict = col::DictData{dict->dict_id, dict->dictionary, Buffer()};
    }
    check_shape(*a);
    return a;
  };

  std::vector<std::optional<col::DictData>> dicts(f.schema.size());
  for (auto& m : f.messages) {
    if (m.type == MsgType::DictBatch) {
      if (m.dict_id >= f.schema.size() || !f.schema.fields[m.dict_id].dict)
        bad(fmt::format("dictionary batch for non-dictionary column {}", m.dict_id));
      if (m.arrays.size() != 1) bad("dictionary batch must hold one array");
      col::Field plain{f.schema.fields[m.dict_id].name, col::DType::Utf8};
      auto d = make(m.arrays[0], plain, std::nullopt, true);
      if (d->null_count) bad("dictionary with nulls");
      dicts[m.dict_id] = col::DictData{col::next_dict_id(), d, Buffer()};
      continue;
    }
    if (m.arrays.size() != f.schema.size()) bad("record batch arity differs from schema");
    col::RecordBatch rb;
    rb.nrows = m.arrays.empty() ? 0 : m.arrays[0].length;
    for (size_t c = 0; c < m.arrays.size(); ++c) {
      if (m.arrays[c].length != rb.nrows) bad("columns of different lengths");
      auto a = make(m.arrays[c], f.schema.fields[c], dicts[c], false);
      if (a->null_count && !f.schema.fields[c].nullable) bad("nulls in non-nullable column");
      rb.columns.push_back(std::move(a));
    }
    out.table.batches.push_back(std::move(rb));
  }
  return out;
}

}  // namespace

WriteResult write(const col::Table& t, mem::Store& store, const ShareMap* sharemap, mem::AccountId account,
                  const WriteOptions& opts) {
  Writer w(store, sharemap, account, opts);
  auto model = w.run(t);
  WriteResult r;
  r.report = w.report(model);
  r.file = encode(model);
  return r;
}

SharingReport inspect(std::span<const std::byte> file) {
  return Writer::inspect_model(parse(file, false));
}

ReadResult read(std::span<const std::byte> file, mem::Store& store, mem::AccountId reader) {
  auto model = parse(file);
  col::MemoryContext ctx{&store, reader};
  return build(model, store, reader, [&](const BufferDesc& b) { return col::make_buffer(ctx, b.payload); });
}

SegRef persist(mem::Store& store, mem::AccountId account, std::span<const std::byte> file) {
  auto seg = store.new_segment(account);
  return store.append_bytes(seg, file);
}

std::vector<std::byte> load(mem::Store& store, const SegRef& sink, mem::AccountId reader) {
  auto view = store.map_ref(sink);
  auto pin = view->pin_all(reader);
  return std::vector<std::byte>(pin.data(), pin.data() + pin.size());
}

ReadResult read_sink(mem::Store& store, const SegRef& sink, mem::AccountId reader) {
  auto core = col::BufferCore::mapped(&store, sink, reader, {store.map_ref(sink)});
  FileModel model;
  {
    auto pin = core->pin(0, sink.length);
    model = parse(pin.bytes(), false);
  }
  return build(model, store, reader, [&](const BufferDesc& b) { return Buffer(core, b.file_offset, b.inline_len); });
}

}  // namespace zsim::sipc
