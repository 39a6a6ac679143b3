#include "mdctcodec/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "mdctcodec/detail/hash.hpp"
#include "mdctcodec/error.hpp"

namespace mdctcodec {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename N>
N parse_number(std::string_view key, std::string_view text) {
  N value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  require(ec == std::errc() && ptr == end && !text.empty(), ErrorKind::kInvalidConfig,
          "invalid value for " + std::string(key) + ": '" + std::string(text) + "'");
  return value;
}

template <typename N>
std::string format_number(N value) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), ptr);
}

struct Entry {
  const char* name;
  bool fingerprinted;
  std::function<std::string(const CodecConfig&)> get;
  std::function<void(CodecConfig&, std::string_view)> set;
};

template <typename N, typename Access>
Entry number(const char* name, bool fp, Access access) {
  return Entry{name, fp,
               [access](const CodecConfig& c) {
                 return format_number(access(const_cast<CodecConfig&>(c)));
               },
               [access, name](CodecConfig& c, std::string_view v) {
                 access(c) = parse_number<N>(name, v);
               }};
}

#define MDCT_SIZE(name, fp, field) \
  number<std::size_t>(name, fp, [](CodecConfig& c) -> std::size_t& { return c.field; })
#define MDCT_REAL(name, fp, field) \
  number<double>(name, fp, [](CodecConfig& c) -> double& { return c.field; })

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_number(v[i]);
  return out;
}

std::string path_value(std::string_view v) { return std::string(v); }

const std::vector<Entry>& registry() {
  static const std::vector<Entry> entries = {
      number<std::uint32_t>("sample_rate", true,
                            [](CodecConfig& c) -> std::uint32_t& { return c.sample_rate; }),
      MDCT_SIZE("mdct_bins", true, mdct_bins),
      MDCT_SIZE("hidden_width", true, model.hidden_width),
      MDCT_SIZE("block_intermediate", true, model.block_intermediate),
      MDCT_SIZE("num_blocks", true, model.num_blocks),
      MDCT_SIZE("latent_dim", true, model.latent_dim),
      MDCT_SIZE("downsample_rate", true, model.downsample_rate),
      MDCT_SIZE("kernel_size", true, model.kernel_size),
      MDCT_SIZE("num_quantizers", true, rvq.num_quantizers),
      MDCT_SIZE("codebook_size", true, rvq.codebook_size),
      MDCT_SIZE("dead_code_steps", true, rvq.dead_code_steps),
      MDCT_SIZE("kmeans_iterations", true, rvq.kmeans_iterations),
      MDCT_SIZE("disc_channels", true, disc.channels),
      Entry{"disc_resolutions", true,
            [](const CodecConfig& c) { return join_sizes(c.disc.resolutions); },
            [](CodecConfig& c, std::string_view v) {
              std::vector<std::size_t> out;
              while (!v.empty()) {
                const auto comma = v.find(',');
                out.push_back(parse_number<std::size_t>("disc_resolutions", trim(v.substr(0, comma))));
                if (comma == std::string_view::npos) break;
                v.remove_prefix(comma + 1);
              }
              c.disc.resolutions = out;
            }},
      MDCT_SIZE("mel_fft_size", true, mel_fft_size),
      MDCT_SIZE("mel_bins", true, mel_bins),
      MDCT_REAL("mel_f_min", true, mel_f_min),
      MDCT_REAL("mel_f_max", true, mel_f_max),
      MDCT_REAL("mel_log_floor", true, mel_log_floor),
      MDCT_REAL("lambda_adv", true, loss.adv),
      MDCT_REAL("lambda_fm", true, loss.fm),
      MDCT_REAL("lambda_mdct", true, loss.mdct),
      MDCT_REAL("lambda_mel", true, loss.mel),
      MDCT_REAL("lambda_cb", true, loss.cb),
      MDCT_REAL("lambda_com", true, loss.com),
      MDCT_SIZE("batch_size", true, train.batch_size),
      MDCT_SIZE("segment_samples", true, train.segment_samples),
      MDCT_REAL("lr", true, train.lr),
      MDCT_REAL("beta1", true, train.beta1),
      MDCT_REAL("beta2", true, train.beta2),
      MDCT_REAL("adam_eps", true, train.adam_eps),
      MDCT_REAL("weight_decay", true, train.weight_decay),
      MDCT_REAL("lr_decay_per_epoch", true, train.lr_decay_per_epoch),
      number<std::uint64_t>("seed", true, [](CodecConfig& c) -> std::uint64_t& { return c.train.seed; }),
      Entry{"precision", true,
            [](const CodecConfig& c) {
              return std::string(c.train.precision == Precision::kFloat32 ? "f32" : "f64");
            },
            [](CodecConfig& c, std::string_view v) {
              if (v == "f32" || v == "float")
                c.train.precision = Precision::kFloat32;
              else if (v == "f64" || v == "double")
                c.train.precision = Precision::kFloat64;
              else
                fail(ErrorKind::kInvalidConfig, "precision must be f32 or f64, got '" + std::string(v) + "'");
            }},
      MDCT_SIZE("total_steps", false, train.total_steps),
      MDCT_SIZE("checkpoint_every", false, train.checkpoint_every),
      MDCT_SIZE("log_every", false, train.log_every),
      Entry{"corpus_dir", false, [](const CodecConfig& c) { return c.train.corpus_dir; },
            [](CodecConfig& c, std::string_view v) { c.train.corpus_dir = path_value(v); }},
      Entry{"checkpoint_dir", false, [](const CodecConfig& c) { return c.train.checkpoint_dir; },
            [](CodecConfig& c, std::string_view v) { c.train.checkpoint_dir = path_value(v); }},
      Entry{"metrics_path", false, [](const CodecConfig& c) { return c.train.metrics_path; },
            [](CodecConfig& c, std::string_view v) { c.train.metrics_path = path_value(v); }},
  };
  return entries;
}

#undef MDCT_SIZE
#undef MDCT_REAL

}  // namespace

MelConfig CodecConfig::mel() const {
  MelConfig m;
  m.sample_rate = sample_rate;
  m.fft_size = mel_fft_size;
  m.hop = mdct_bins;
  m.mel_bins = mel_bins;
  m.f_min = mel_f_min;
  m.f_max = mel_f_max;
  m.log_floor = mel_log_floor;
  return m;
}

void CodecConfig::validate() const {
  require(sample_rate > 0, ErrorKind::kInvalidConfig, "sample_rate must be positive");
  mdct().validate();
  model.validate();
  require(model.spectrum_bins == mdct_bins, ErrorKind::kInvalidConfig,
          "model spectrum width must equal mdct_bins");
  rvq.validate();
  require(rvq.code_dim == model.latent_dim, ErrorKind::kInvalidConfig,
          "codebook dimension must equal latent_dim");
  require(rvq.num_quantizers <= 255, ErrorKind::kInvalidConfig, "at most 255 quantizers");
  require(mdct_bins <= 65535 && model.downsample_rate <= 65535, ErrorKind::kInvalidConfig,
          "mdct_bins and downsample_rate must fit in 16 bits");
  disc.validate();
  mel().validate();
  loss.validate();
  require(train.batch_size >= 1, ErrorKind::kInvalidConfig, "batch_size must be at least 1");
  require(train.segment_samples >= 1, ErrorKind::kInvalidConfig, "segment_samples must be positive");
  require(train.lr > 0.0, ErrorKind::kInvalidConfig, "lr must be positive");
  require(train.beta1 >= 0.0 && train.beta1 < 1.0 && train.beta2 >= 0.0 && train.beta2 < 1.0,
          ErrorKind::kInvalidConfig, "Adam betas must lie in [0, 1)");
  require(train.adam_eps > 0.0 && train.weight_decay >= 0.0, ErrorKind::kInvalidConfig,
          "adam_eps must be positive and weight_decay non-negative");
  require(train.lr_decay_per_epoch > 0.0 && train.lr_decay_per_epoch <= 1.0,
          ErrorKind::kInvalidConfig, "lr_decay_per_epoch must lie in (0, 1]");
  require(train.log_every >= 1, ErrorKind::kInvalidConfig, "log_every must be at least 1");
  for (auto k : disc.resolutions)
    require(k <= effective_segment(), ErrorKind::kInvalidConfig,
            "discriminator resolution exceeds the training segment");
}

std::size_t CodecConfig::effective_segment() const {
  const std::size_t hop = token_hop();
  return (train.segment_samples + hop - 1) / hop * hop;
}

double CodecConfig::bitrate() const {
  return bitrate_bps(sample_rate, mdct_bins, model.downsample_rate, rvq.num_quantizers,
                     rvq.codebook_size);
}

void CodecConfig::set(std::string_view key, std::string_view value) {
  for (const auto& e : registry()) {
    if (key != e.name) continue;
    e.set(*this, trim(value));
    // Keep the derived widths tied to their owners.
    model.spectrum_bins = mdct_bins;
    rvq.code_dim = model.latent_dim;
    return;
  }
  std::string valid;
  for (const auto& k : keys()) valid += (valid.empty() ? "" : ", ") + k;
  fail(ErrorKind::kInvalidConfig, "unknown config key '" + std::string(key) + "'; valid keys: " + valid);
}

void CodecConfig::set_assignment(std::string_view assignment) {
  const auto eq = assignment.find('=');
  require(eq != std::string_view::npos, ErrorKind::kInvalidConfig,
          "expected key=value, got '" + std::string(assignment) + "'");
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

void CodecConfig::parse(std::string_view text) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    auto line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = trim(line.substr(0, hash));
    if (line.empty()) continue;
    try {
      set_assignment(line);
    } catch (const Error& e) {
      fail(e.kind(), "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

std::string CodecConfig::to_text() const {
  std::string out;
  for (const auto& e : registry()) out += std::string(e.name) + "=" + e.get(*this) + "\n";
  return out;
}

std::array<std::uint8_t, 16> CodecConfig::fingerprint() const {
  std::string text;
  for (const auto& e : registry())
    if (e.fingerprinted) text += std::string(e.name) + "=" + e.get(*this) + "\n";
  return detail::blake2b128({reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

std::vector<std::string> CodecConfig::keys() {
  std::vector<std::string> out;
  for (const auto& e : registry()) out.emplace_back(e.name);
  return out;
}

CodecConfig CodecConfig::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::kIo, "cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  CodecConfig cfg;
  cfg.parse(ss.str());
  return cfg;
}

std::string hex(std::span<const std::uint8_t> bytes) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  for (auto b : bytes) {
    out += digits[b >> 4];
    out += digits[b & 15];
  }
  return out;
}

}  // namespace mdctcodec
