#include "zsim/sipc/format.hpp"

#include <cstring>

#include <fmt/format.h>

#include "zsim/util/error.hpp"

namespace zsim::sipc {

BufferDesc BufferDesc::make_inline(Role role, std::vector<std::byte> bytes) {
  BufferDesc b;
  b.role = role;
  b.inline_len = bytes.size();
  b.payload = std::move(bytes);
  return b;
}

BufferDesc BufferDesc::make_ref(Role role, const mem::SegRef& ref) {
  BufferDesc b;
  b.role = role;
  b.is_inline = false;
  b.ref = ref;
  return b;
}

void encode_schema(ByteWriter& w, const col::Schema& s) {
  w.u16(uint16_t(s.size()));
  for (auto& f : s.fields) {
    w.u16(uint16_t(f.name.size()));
    w.str(f.name);
    w.u8(uint8_t(f.type));
    w.u8(f.dict ? 1 : 0);
    w.u8(f.nullable ? 1 : 0);
  }
}

col::Schema decode_schema(ByteReader& r, ErrorCode code) {
  col::Schema s;
  uint16_t n = r.u16();
  for (uint16_t i = 0; i < n; ++i) {
    col::Field f;
    f.name = r.str(r.u16());
    uint8_t tag = r.u8();
    if (tag > 3) throw Error(code, fmt::format("bad type tag {}", tag));
    f.type = col::DType(tag);
    uint8_t dict = r.u8(), nullable = r.u8();
    if (dict > 1 || nullable > 1) throw Error(code, "bad schema flag");
    if (dict && f.type != col::DType::Utf8) throw Error(code, "dictionary flag on non-Utf8 column");
    f.dict = dict;
    f.nullable = nullable;
    if (s.contains(f.name)) throw Error(code, fmt::format("duplicate column '{}'", f.name));
    s.fields.push_back(std::move(f));
  }
  return s;
}

std::vector<std::byte> encode(const FileModel& f) {
  ByteWriter w;
  w.bytes(std::as_bytes(std::span(kMagic)));
  w.u16(kVersion);
  w.u16(f.flags);
  ByteWriter schema;
  encode_schema(schema, f.schema);
  w.u32(uint32_t(schema.size()));
  w.bytes(schema.buffer());
  w.u32(uint32_t(f.messages.size()));
  for (auto& m : f.messages) {
    w.u8(uint8_t(m.type));
    if (m.type == MsgType::DictBatch) w.u32(m.dict_id);
    w.u32(uint32_t(m.arrays.size()));
    for (auto& a : m.arrays) {
      w.u8(uint8_t(a.type));
      w.u64(a.length);
      w.u64(a.null_count);
      w.u64(a.slice_offset);
      w.u8(uint8_t(a.buffers.size()));
      for (auto& b : a.buffers) {
        w.u8(uint8_t(b.role));
        w.u8(b.is_inline ? 0 : 1);
        if (b.is_inline) {
          w.u64(b.payload.size());
          w.bytes(b.payload);
          w.pad_to(8);
        } else {
          w.u64(b.ref.segment);
          w.u64(b.ref.offset);
          w.u64(b.ref.length);
        }
      }
    }
  }
  return w.take();
}

FileModel parse(std::span<const std::byte> bytes, bool copy_payloads) {
  ByteReader r(bytes, int(ErrorCode::ParseError));
  auto magic = r.bytes(6);
  if (std::memcmp(magic.data(), kMagic, 6) != 0) fail(ErrorCode::ParseError, "bad SIPC magic");
  FileModel f;
  if (uint16_t v = r.u16(); v != kVersion) fail(ErrorCode::ParseError, fmt::format("unsupported version {}", v));
  f.flags = r.u16();
  uint32_t slen = r.u32();
  ByteReader sr(r.bytes(slen), int(ErrorCode::ParseError));
  f.schema = decode_schema(sr, ErrorCode::ParseError);
  if (!sr.done()) fail(ErrorCode::ParseError, "trailing schema bytes");
  uint32_t nmsg = r.u32();
  for (uint32_t i = 0; i < nmsg; ++i) {
    Message m;
    uint8_t type = r.u8();
    if (type > 1) fail(ErrorCode::ParseError, fmt::format("bad message type {}", type));
    m.type = MsgType(type);
    if (m.type == MsgType::DictBatch) m.dict_id = r.u32();
    uint32_t narr = r.u32();
    if (narr > r.remaining()) fail(ErrorCode::ParseError, "array count exceeds file");
    for (uint32_t j = 0; j < narr; ++j) {
      ArrayDesc a;
      uint8_t tag = r.u8();
      if (tag > 3) fail(ErrorCode::ParseError, fmt::format("bad type tag {}", tag));
      a.type = col::DType(tag);
      a.length = r.u64();
      a.null_count = r.u64();
      a.slice_offset = r.u64();
      uint8_t nbuf = r.u8();
      for (uint8_t k = 0; k < nbuf; ++k) {
        BufferDesc b;
        uint8_t role = r.u8(), kind = r.u8();
        if (role > 3 || kind > 1) fail(ErrorCode::ParseError, "bad buffer descriptor");
        b.role = Role(role);
        b.is_inline = kind == 0;
        if (b.is_inline) {
          b.inline_len = r.u64();
          b.file_offset = r.pos();
          auto p = r.bytes(b.inline_len);
          if (copy_payloads) b.payload.assign(p.begin(), p.end());
          r.align(8);
        } else {
          b.ref.segment = r.u64();
          b.ref.offset = r.u64();
          b.ref.length = r.u64();
          if (b.ref.length == 0) fail(ErrorCode::ParseError, "empty segment reference");
        }
        a.buffers.push_back(std::move(b));
      }
      m.arrays.push_back(std::move(a));
    }
    f.messages.push_back(std::move(m));
  }
  if (!r.done()) fail(ErrorCode::ParseError, "trailing bytes after messages");
  return f;
}

}  // namespace zsim::sipc
