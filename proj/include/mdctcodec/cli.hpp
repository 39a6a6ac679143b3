#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "mdctcodec/codec.hpp"
#include "mdctcodec/error.hpp"
#include "mdctcodec/transform.hpp"

namespace mdctcodec {

// Short-time log-spectral distance in dB: 2048-sample periodic Hann frames,
// hop 512, magnitudes floored at 1e-7, RMS of the per-bin dB ratio per frame,
// averaged over frames. Inputs shorter than a frame are zero-padded.
double lsd(const Waveform& ref, const Waveform& test);

struct EvalFileResult {
  std::string name;
  bool ok = false;
  std::string error_code;
  std::string error;
  std::size_t samples = 0;
  double duration = 0.0;  // seconds of audio
  double seconds = 0.0;   // encode + decode wall time
  std::size_t payload_bits = 0;
  double lsd_db = 0.0;

  double bitrate() const { return duration > 0 ? payload_bits / duration : 0.0; }
  double rtf() const { return duration > 0 ? seconds / duration : 0.0; }
};

struct EvalReport {
  std::vector<EvalFileResult> files;

  std::size_t failed() const;
  double mean_lsd() const;
  double bitrate() const;  // total payload bits over total duration
  double rtf() const;      // total wall time over total duration
  std::string to_text() const;
};

// Every *.wav under `dir`, in path order. Files are independent and are
// spread over `jobs` worker threads.
EvalReport evaluate_directory(const std::string& dir, const AudioCodec& codec, std::size_t jobs = 1);

// One CSV row per frame, K columns.
void write_spectrum_csv(const std::string& path, const MdctSpectrum& spectrum);

inline constexpr int kExitOk = 0;
inline constexpr int kExitOther = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitRateMismatch = 4;
inline constexpr int kExitMissingCheckpoint = 5;
inline constexpr int kExitUnsupported = 6;
inline constexpr int kExitCorruptStream = 7;
inline constexpr int kExitFingerprint = 8;
inline constexpr int kExitInvalidConfig = 9;
inline constexpr int kExitDiverged = 10;
inline constexpr int kExitAllFailed = 11;

int exit_code_for(ErrorKind kind);

// Environment variable naming the default checkpoint directory.
inline constexpr const char* kCheckpointDirEnv = "MDCTCODEC_CHECKPOINT_DIR";

// Full command line; errors print one "error: code=... message=..." line to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mdctcodec
