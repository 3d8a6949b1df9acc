#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace zsim {

enum class ErrorCode {
  InvalidConfig,
  InvalidArgument,
  OutOfMemory,
  SwapFull,
  AlreadyShared,
  UnknownSegment,
  UnknownAccount,
  UnknownRegion,
  DanglingRef,
  BusySegment,
  TypeError,
  UnknownColumn,
  SchemaMismatch,
  LengthMismatch,
  OutOfRange,
  SingularSystem,
  EncodingMismatch,
  BadMagic,
  CorruptChunk,
  IoError,
  ParseError,
  StaleTicket,
  RefcountError,
  InvalidDag,
  InsufficientEvictables,
  NodeFailed,
  UsageError,
  Internal,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

}  // namespace zsim
