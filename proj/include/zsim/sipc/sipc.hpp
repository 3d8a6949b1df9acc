#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "zsim/columnar/array.hpp"
#include "zsim/sipc/format.hpp"

namespace zsim::sipc {

// Buffer identity (core id) -> segment range of the whole core, for every
// buffer obtained by reading an input.
class ShareMap {
 public:
  void add(uint64_t core_id, const mem::SegRef& ref) { entries_[core_id] = ref; }
  // Segment range of `b`, including sub-views of a recorded core.
  std::optional<mem::SegRef> resolve(const col::Buffer& b) const;
  void merge(const ShareMap& o);
  size_t size() const { return entries_.size(); }

 private:
  std::unordered_map<uint64_t, mem::SegRef> entries_;
};

struct SharingReport {
  std::vector<mem::SegRef> refs;  // distinct descriptors, sorted
  uint64_t inline_bytes = 0;
  // Known to the writer only; inspect() leaves these empty.
  std::vector<mem::SegmentId> new_segments;
  uint64_t new_segment_bytes = 0;

  std::vector<mem::SegmentId> segments() const;
  uint64_t referenced_bytes() const;
  // Equality of what inspect() can recover from a file.
  bool same_references(const SharingReport& o) const { return refs == o.refs && inline_bytes == o.inline_bytes; }
};

struct WriteOptions {
  // Writer-copy baseline: no resharing, no deanon, every buffer inline.
  bool baseline = false;
  // Buffers below this size are inlined; 0 means one page.
  uint64_t inline_threshold = 0;
};

struct WriteResult {
  std::vector<std::byte> file;
  SharingReport report;
};

WriteResult write(const col::Table& t, mem::Store& store, const ShareMap* sharemap, mem::AccountId account,
                  const WriteOptions& opts = {});

SharingReport inspect(std::span<const std::byte> file);

struct ReadResult {
  col::Table table;
  ShareMap sharemap;
};

// Inline payloads are copied into anonymous memory of `reader`.
ReadResult read(std::span<const std::byte> file, mem::Store& store, mem::AccountId reader);

// A persisted output: file in its sink segment plus the writer's report.
struct StoredOutput {
  mem::SegRef sink;
  SharingReport report;
  // Segments the output depends on: referenced ones plus the sink.
  std::vector<mem::SegmentId> segments() const;
};

// SIPC file stored in its own segment (the sink).
mem::SegRef persist(mem::Store& store, mem::AccountId account, std::span<const std::byte> file);
std::vector<std::byte> load(mem::Store& store, const mem::SegRef& sink, mem::AccountId reader);
// Reads a persisted file; inline payloads become views into the sink.
ReadResult read_sink(mem::Store& store, const mem::SegRef& sink, mem::AccountId reader);

}  // namespace zsim::sipc
