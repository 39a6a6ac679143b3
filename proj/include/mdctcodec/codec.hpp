#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mdctcodec/bitstream.hpp"
#include "mdctcodec/config.hpp"
#include "mdctcodec/transform.hpp"

namespace mdctcodec {

struct EncodedAudio {
  std::vector<std::uint8_t> bytes;
  std::size_t payload_bits = 0;
};

// Waveform <-> byte stream. Implementations are safe to call concurrently.
class AudioCodec {
 public:
  virtual ~AudioCodec() = default;
  virtual EncodedAudio encode(const Waveform& audio) const = 0;
  // `force` accepts streams whose fingerprint differs from the model's.
  virtual Waveform decode(std::span<const std::uint8_t> bytes, bool force = false) const = 0;
  virtual std::uint32_t sample_rate() const = 0;
  virtual double nominal_bitrate() const = 0;
};

// Lossless reference: raw float64 samples behind a rate/count header.
class PassthroughCodec : public AudioCodec {
 public:
  explicit PassthroughCodec(std::uint32_t sample_rate) : rate_(sample_rate) {}
  EncodedAudio encode(const Waveform& audio) const override;
  Waveform decode(std::span<const std::uint8_t> bytes, bool force = false) const override;
  std::uint32_t sample_rate() const override { return rate_; }
  double nominal_bitrate() const override { return 64.0 * rate_; }

 private:
  std::uint32_t rate_;
};

template <typename T>
struct Generator;
template <typename T>
class ResidualVq;

// BLAKE2b-128 over every codebook's shape and values (widened to float64).
template <typename T>
std::array<std::uint8_t, 16> codebook_fingerprint(const ResidualVq<T>& rvq);

template <typename T>
class NeuralCodec : public AudioCodec {
 public:
  // Fresh, untrained weights drawn from the config seed.
  explicit NeuralCodec(const CodecConfig& cfg);
  // Weights and codebooks from a checkpoint; its own config is used.
  explicit NeuralCodec(std::span<const std::uint8_t> checkpoint_bytes);
  ~NeuralCodec() override;

  // Pads to whole token frames, then encodes; the header keeps the true length.
  Bitstream encode_tokens(const Waveform& audio) const;
  Waveform decode_tokens(const Bitstream& stream, bool force = false) const;

  EncodedAudio encode(const Waveform& audio) const override;
  Waveform decode(std::span<const std::uint8_t> bytes, bool force = false) const override;
  std::uint32_t sample_rate() const override { return cfg_.sample_rate; }
  double nominal_bitrate() const override { return cfg_.bitrate(); }

  const CodecConfig& config() const { return cfg_; }
  const std::array<std::uint8_t, 16>& fingerprint() const { return fingerprint_; }
  Generator<T>& generator() { return *gen_; }
  // Call after editing the codebooks in place.
  void refresh_fingerprint() { fingerprint_ = codebook_fingerprint(gen_->rvq); }

 private:
  CodecConfig cfg_;
  std::unique_ptr<Generator<T>> gen_;
  std::array<std::uint8_t, 16> fingerprint_{};
};

// Reads a checkpoint and builds the codec at the precision it was saved in.
std::unique_ptr<AudioCodec> load_codec(const std::string& checkpoint_path);

}  // namespace mdctcodec
