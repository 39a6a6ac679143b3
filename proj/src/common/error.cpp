#include "mdctcodec/error.hpp"

namespace mdctcodec {

std::string_view reason_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidConfig: return "invalid_config";
    case ErrorKind::kShape: return "shape";
    case ErrorKind::kContract: return "contract";
    case ErrorKind::kCorruptStream: return "corrupt_stream";
    case ErrorKind::kTruncatedStream: return "truncated_stream";
    case ErrorKind::kFingerprintMismatch: return "fingerprint_mismatch";
    case ErrorKind::kIntegrity: return "integrity";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kUnsupported: return "unsupported";
    case ErrorKind::kRateMismatch: return "rate_mismatch";
    case ErrorKind::kDiverged: return "diverged";
  }
  return "unknown";
}

}  // namespace mdctcodec
