#include "zsim/util/error.hpp"

#include <fmt/format.h>

namespace zsim {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::OutOfMemory: return "OutOfMemory";
    case ErrorCode::SwapFull: return "SwapFull";
    case ErrorCode::AlreadyShared: return "AlreadyShared";
    case ErrorCode::UnknownSegment: return "UnknownSegment";
    case ErrorCode::UnknownAccount: return "UnknownAccount";
    case ErrorCode::UnknownRegion: return "UnknownRegion";
    case ErrorCode::DanglingRef: return "DanglingRef";
    case ErrorCode::BusySegment: return "BusySegment";
    case ErrorCode::TypeError: return "TypeError";
    case ErrorCode::UnknownColumn: return "UnknownColumn";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::EncodingMismatch: return "EncodingMismatch";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::CorruptChunk: return "CorruptChunk";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::StaleTicket: return "StaleTicket";
    case ErrorCode::RefcountError: return "RefcountError";
    case ErrorCode::InvalidDag: return "InvalidDag";
    case ErrorCode::InsufficientEvictables: return "InsufficientEvictables";
    case ErrorCode::NodeFailed: return "NodeFailed";
    case ErrorCode::UsageError: return "UsageError";
    case ErrorCode::Internal: return "Internal";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(fmt::format("{}: {}", to_string(code), what)), code_(code) {}

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace zsim
