#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "zsim/columnar/types.hpp"
#include "zsim/memstore/store.hpp"
#include "zsim/util/bytes.hpp"
#include "zsim/util/error.hpp"

// Wire layout of SIPC files. Parsing needs no store.
namespace zsim::sipc {

inline constexpr char kMagic[6] = {'S', 'I', 'P', 'C', '1', '\0'};
inline constexpr uint16_t kVersion = 1;
inline constexpr uint16_t kFlagBaseline = 1;

enum class Role : uint8_t { Validity = 0, Offsets = 1, Values = 2, Codes = 3 };
enum class MsgType : uint8_t { RecordBatch = 0, DictBatch = 1 };

struct BufferDesc {
  Role role = Role::Values;
  bool is_inline = true;
  std::vector<std::byte> payload;  // inline; left empty by parse(.., false)
  uint64_t inline_len = 0;
  uint64_t file_offset = 0;        // of the inline payload, set by parse
  mem::SegRef ref;                 // segref only

  static BufferDesc make_inline(Role role, std::vector<std::byte> bytes);
  static BufferDesc make_ref(Role role, const mem::SegRef& ref);
  uint64_t length() const { return is_inline ? inline_len : ref.length; }
};

struct ArrayDesc {
  col::DType type = col::DType::Int64;
  uint64_t length = 0;
  uint64_t null_count = 0;
  uint64_t slice_offset = 0;
  std::vector<BufferDesc> buffers;
};

struct Message {
  MsgType type = MsgType::RecordBatch;
  uint32_t dict_id = 0;  // dict batches only
  std::vector<ArrayDesc> arrays;
};

struct FileModel {
  uint16_t flags = 0;
  col::Schema schema;
  std::vector<Message> messages;
};

void encode_schema(ByteWriter& w, const col::Schema& s);
// Throws Error(code) on malformed input.
col::Schema decode_schema(ByteReader& r, ErrorCode code);

std::vector<std::byte> encode(const FileModel& f);
// Throws ParseError. Without copy_payloads only offsets of inline payloads
// are recorded.
FileModel parse(std::span<const std::byte> bytes, bool copy_payloads = true);

}  // namespace zsim::sipc
