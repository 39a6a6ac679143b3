#include "mdctcodec/codec.hpp"

#include <cstring>
#include <random>

#include "mdctcodec/checkpoint.hpp"
#include "mdctcodec/detail/hash.hpp"
#include "mdctcodec/error.hpp"
#include "mdctcodec/trainer.hpp"

namespace mdctcodec {

namespace {

constexpr char kRawMagic[4] = {'R', 'A', 'W', '8'};

template <typename T>
constexpr char dtype_tag() {
  return sizeof(T) == 4 ? 'f' : 'd';
}

CodecConfig config_from(const Checkpoint& c) {
  CodecConfig cfg;
  cfg.parse(c.config_text);
  cfg.validate();
  require(cfg.fingerprint() == c.fingerprint, ErrorKind::kIntegrity,
          "checkpoint config does not reproduce its stored fingerprint");
  return cfg;
}

}  // namespace

template <typename T>
std::array<std::uint8_t, 16> codebook_fingerprint(const ResidualVq<T>& rvq) {
  detail::Hasher h;
  for (const auto& book : rvq.codebooks) {
    for (std::uint64_t d : book.shape()) h.update(&d, sizeof d);
    for (T v : book.data()) {
      const double wide = static_cast<double>(v);
      h.update(&wide, sizeof wide);
    }
  }
  return h.finish();
}

EncodedAudio PassthroughCodec::encode(const Waveform& audio) const {
  require(audio.sample_rate == rate_, ErrorKind::kRateMismatch,
          "input rate " + std::to_string(audio.sample_rate) + " differs from " + std::to_string(rate_));
  EncodedAudio out;
  out.bytes.assign(std::begin(kRawMagic), std::end(kRawMagic));
  const std::uint64_t n = audio.samples.size();
  out.bytes.resize(12 + n * 8);
  std::memcpy(out.bytes.data() + 4, &n, 8);
  std::memcpy(out.bytes.data() + 12, audio.samples.data(), n * 8);
  out.payload_bits = n * 64;
  return out;
}

Waveform PassthroughCodec::decode(std::span<const std::uint8_t> bytes, bool) const {
  require(bytes.size() >= 12 && std::memcmp(bytes.data(), kRawMagic, 4) == 0, ErrorKind::kCorruptStream,
          "not a raw sample stream");
  std::uint64_t n = 0;
  std::memcpy(&n, bytes.data() + 4, 8);
  require(bytes.size() == 12 + n * 8, ErrorKind::kCorruptStream, "raw sample stream has the wrong length");
  Waveform w;
  w.sample_rate = rate_;
  w.samples.resize(n);
  std::memcpy(w.samples.data(), bytes.data() + 12, n * 8);
  return w;
}

template <typename T>
NeuralCodec<T>::NeuralCodec(const CodecConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  std::mt19937_64 rng(cfg_.train.seed);
  gen_ = std::make_unique<Generator<T>>(cfg_, rng);
  fingerprint_ = codebook_fingerprint(gen_->rvq);
}

template <typename T>
NeuralCodec<T>::NeuralCodec(std::span<const std::uint8_t> checkpoint_bytes) {
  const auto c = Checkpoint::deserialize(checkpoint_bytes);
  require(c.dtype == dtype_tag<T>(), ErrorKind::kUnsupported, "checkpoint precision does not match the codec");
  cfg_ = config_from(c);
  std::mt19937_64 rng(cfg_.train.seed);
  gen_ = std::make_unique<Generator<T>>(cfg_, rng);
  restore_generator(c, *gen_);
  require(gen_->rvq.initialized(), ErrorKind::kContract, "checkpoint codebooks were never initialized");
  fingerprint_ = codebook_fingerprint(gen_->rvq);
}

template <typename T>
NeuralCodec<T>::~NeuralCodec() = default;

template <typename T>
Bitstream NeuralCodec<T>::encode_tokens(const Waveform& audio) const {
  require(audio.sample_rate == cfg_.sample_rate, ErrorKind::kRateMismatch,
          "input rate " + std::to_string(audio.sample_rate) + " Hz differs from the model rate " +
              std::to_string(cfg_.sample_rate) + " Hz");
  const std::size_t hop = cfg_.token_hop();
  const std::size_t n = audio.samples.size();
  const std::size_t frames = (n + hop - 1) / hop;

  Bitstream s;
  auto& h = s.header;
  h.sample_rate = cfg_.sample_rate;
  h.frame_shift = static_cast<std::uint16_t>(cfg_.mdct_bins);
  h.rate = static_cast<std::uint16_t>(cfg_.model.downsample_rate);
  h.num_quantizers = static_cast<std::uint8_t>(cfg_.rvq.num_quantizers);
  h.log2_codebook = static_cast<std::uint8_t>(cfg_.rvq.bits_per_index());
  h.num_frames = static_cast<std::uint32_t>(frames);
  h.sample_count = n;
  h.fingerprint = fingerprint_;
  if (frames == 0) return s;

  std::vector<T> padded(frames * hop, T(0));
  std::copy(audio.samples.begin(), audio.samples.end(), padded.begin());
  NoGradGuard ng;
  const Shape shape{1, padded.size()};
  const Tensor<T> x(shape, std::move(padded));
  const auto code = gen_->encoder.forward(gen_->mdct.analysis(x));
  s.tokens = gen_->rvq.quantize(code).tokens;
  return s;
}

template <typename T>
Waveform NeuralCodec<T>::decode_tokens(const Bitstream& stream, bool force) const {
  const auto& h = stream.header;
  if (!force)
    require(h.fingerprint == fingerprint_, ErrorKind::kFingerprintMismatch,
            "stream codebook fingerprint " + hex(h.fingerprint) + " differs from the model's " +
                hex(fingerprint_));
  require(h.sample_rate == cfg_.sample_rate && h.frame_shift == cfg_.mdct_bins &&
              h.rate == cfg_.model.downsample_rate && h.num_quantizers == cfg_.rvq.num_quantizers &&
              h.log2_codebook == cfg_.rvq.bits_per_index(),
          ErrorKind::kFingerprintMismatch, "stream geometry does not match the model");
  Waveform w;
  w.sample_rate = h.sample_rate;
  if (h.num_frames == 0) return w;

  NoGradGuard ng;
  const auto q = gen_->rvq.dequantize(stream.tokens, {1, h.num_frames, cfg_.model.latent_dim});
  const auto y = gen_->mdct.synthesis(gen_->decoder.forward(q));
  const auto values = y.data();
  w.samples.assign(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(h.sample_count));
  return w;
}

template <typename T>
EncodedAudio NeuralCodec<T>::encode(const Waveform& audio) const {
  const auto s = encode_tokens(audio);
  return EncodedAudio{pack(s), s.header.payload_bits()};
}

template <typename T>
Waveform NeuralCodec<T>::decode(std::span<const std::uint8_t> bytes, bool force) const {
  return decode_tokens(unpack(bytes), force);
}

std::unique_ptr<AudioCodec> load_codec(const std::string& checkpoint_path) {
  const auto bytes = read_file_bytes(checkpoint_path);
  const auto c = Checkpoint::deserialize(bytes);
  if (c.dtype == 'f') return std::make_unique<NeuralCodec<float>>(bytes);
  return std::make_unique<NeuralCodec<double>>(bytes);
}

template std::array<std::uint8_t, 16> codebook_fingerprint(const ResidualVq<float>&);
template std::array<std::uint8_t, 16> codebook_fingerprint(const ResidualVq<double>&);
template class NeuralCodec<float>;
template class NeuralCodec<double>;

}  // namespace mdctcodec
