#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mdctcodec {

// Broad failure classes. Each maps to a stable reason code used by the CLI.
enum class ErrorKind {
  kInvalidConfig,
  kShape,
  kContract,
  kCorruptStream,
  kTruncatedStream,
  kFingerprintMismatch,
  kIntegrity,
  kIo,
  kUnsupported,
  kRateMismatch,
  kDiverged,
};

std::string_view reason_code(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace mdctcodec
