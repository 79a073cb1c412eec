#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ppft {

// Error identities are part of the toolkit contract: the wire protocol echoes
// the numeric value of the code in its acknowledgment byte, so the values
// below are stable and must not be reordered.
enum class ErrorCode : std::uint8_t {
  None = 0,
  // wire / protocol
  BadMagic = 1,
  UnsupportedVersion = 2,
  LengthMismatch = 3,
  ChecksumMismatch = 4,
  NormViolation = 5,
  TooLarge = 6,
  // ingestion
  ParseError = 7,
  SchemaError = 8,
  // vocab / embedding
  DuplicateToken = 9,
  BadDimension = 10,
  UnknownToken = 11,
  EmptyInput = 12,
  EmptyPool = 13,
  // pooling / shapes
  DegenerateSlot = 14,
  ShapeError = 15,
  // accounting
  BadBudget = 16,
  BoundViolation = 17,
  NeedTwoTokens = 18,
  // transport
  ConnectionFailed = 19,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::None: return "None";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::NormViolation: return "NormViolation";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::DuplicateToken: return "DuplicateToken";
    case ErrorCode::BadDimension: return "BadDimension";
    case ErrorCode::UnknownToken: return "UnknownToken";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::EmptyPool: return "EmptyPool";
    case ErrorCode::DegenerateSlot: return "DegenerateSlot";
    case ErrorCode::ShapeError: return "ShapeError";
    case ErrorCode::BadBudget: return "BadBudget";
    case ErrorCode::BoundViolation: return "BoundViolation";
    case ErrorCode::NeedTwoTokens: return "NeedTwoTokens";
    case ErrorCode::ConnectionFailed: return "ConnectionFailed";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(std::string(to_string(code)) + ": " + msg), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& msg) {
  throw Error(code, msg);
}

}  // namespace ppft
