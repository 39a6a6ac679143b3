#include "mdctcodec/cli.hpp"

#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <thread>

#include "mdctcodec/checkpoint.hpp"
#include "mdctcodec/config.hpp"
#include "mdctcodec/dataset.hpp"
#include "mdctcodec/detail/fft.hpp"
#include "mdctcodec/trainer.hpp"
#include "mdctcodec/wav.hpp"

namespace fs = std::filesystem;

namespace mdctcodec {

namespace {

constexpr std::size_t kLsdFrame = 2048;
constexpr std::size_t kLsdHop = 512;
constexpr double kLsdFloor = 1e-7;

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void report_error(std::ostream& err, std::string_view code, const std::string& message) {
  err << "error: code=" << code << " message=" << one_line(message) << "\n";
}

std::vector<std::vector<double>> magnitudes(const std::vector<double>& x) {
  const auto window = hann_window(kLsdFrame);
  const std::size_t frames = x.size() <= kLsdFrame ? 1 : 1 + (x.size() - kLsdFrame + kLsdHop - 1) / kLsdHop;
  detail::RealFft fft(kLsdFrame);
  std::vector<double> buf(kLsdFrame);
  std::vector<std::complex<double>> spec(fft.bins());
  std::vector<std::vector<double>> out(frames, std::vector<double>(fft.bins()));
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t l = 0; l < kLsdFrame; ++l) {
      const std::size_t i = f * kLsdHop + l;
      buf[l] = i < x.size() ? x[i] * window[l] : 0.0;
    }
    fft.forward(buf.data(), spec.data());
    for (std::size_t k = 0; k < spec.size(); ++k) out[f][k] = std::max(std::abs(spec[k]), kLsdFloor);
  }
  return out;
}

std::vector<fs::path> list_wavs(const std::string& dir) {
  std::error_code ec;
  require(fs::is_directory(dir, ec), ErrorKind::kIo, "not a directory: " + dir);
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    auto ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".wav") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

EvalFileResult evaluate_file(const fs::path& path, const fs::path& root, const AudioCodec& codec) {
  EvalFileResult r;
  r.name = fs::relative(path, root).generic_string();
  try {
    const auto x = read_wav(path.string());
    r.samples = x.samples.size();
    r.duration = static_cast<double>(x.samples.size()) / x.sample_rate;
    const auto start = std::chrono::steady_clock::now();
    const auto encoded = codec.encode(x);
    const auto y = codec.decode(encoded.bytes);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    r.payload_bits = encoded.payload_bits;
    r.lsd_db = lsd(x, y);
    r.ok = true;
  } catch (const Error& e) {
    r.error_code = std::string(reason_code(e.kind()));
    r.error = one_line(e.what());
    spdlog::warn("eval: {} failed: {}", r.name, r.error);
  }
  return r;
}

struct Options {
  std::string config_path;
  std::vector<std::string> sets;
  std::string checkpoint;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
  bool force = false;
  std::string input;
};

CodecConfig build_config(const Options& o) {
  CodecConfig cfg = o.config_path.empty() ? CodecConfig{} : CodecConfig::load_file(o.config_path);
  for (const auto& s : o.sets) cfg.set_assignment(s);
  if (o.seed) cfg.train.seed = *o.seed;
  cfg.validate();
  return cfg;
}

struct MissingCheckpoint {
  std::string message;
};

std::string resolve_checkpoint(const Options& o) {
  if (!o.checkpoint.empty()) {
    if (!fs::exists(o.checkpoint)) throw MissingCheckpoint{"checkpoint not found: " + o.checkpoint};
    return o.checkpoint;
  }
  if (const char* dir = std::getenv(kCheckpointDirEnv); dir && *dir) {
    const auto p = (fs::path(dir) / "latest.ckpt").string();
    if (fs::exists(p)) return p;
    throw MissingCheckpoint{"checkpoint not found: " + p};
  }
  throw MissingCheckpoint{std::string("no --checkpoint given and ") + kCheckpointDirEnv + " is not set"};
}

void require_out(const Options& o, const char* command) {
  if (o.out.empty()) throw CLI::RequiredError(std::string("--out is required for ") + command);
}

int cmd_encode(const Options& o, std::ostream& out) {
  require_out(o, "encode");
  build_config(o);
  const auto codec = load_codec(resolve_checkpoint(o));
  const auto x = read_wav(o.input);
  const auto encoded = codec->encode(x);
  write_file_bytes(o.out, encoded.bytes);
  const double duration = static_cast<double>(x.samples.size()) / x.sample_rate;
  out << "samples=" << x.samples.size() << " payload_bits=" << encoded.payload_bits
      << " bytes=" << encoded.bytes.size() << " duration_s=" << format_double(duration)
      << " bitrate_bps=" << format_double(duration > 0 ? encoded.payload_bits / duration : 0.0)
      << " nominal_bps=" << format_double(codec->nominal_bitrate()) << "\n";
  return kExitOk;
}

int cmd_decode(const Options& o, std::ostream& out) {
  require_out(o, "decode");
  build_config(o);
  const auto path = resolve_checkpoint(o);
  const auto bytes = read_file_bytes(o.input);
  const auto codec = load_codec(path);
  auto y = codec->decode(bytes, o.force);
  std::size_t clipped = 0;
  for (auto& v : y.samples) {
    if (v > 1.0 || v < -1.0) {
      v = std::clamp(v, -1.0, 1.0);
      ++clipped;
    }
  }
  if (clipped) spdlog::warn("decode: clamped {} samples to [-1, 1]", clipped);
  write_wav(o.out, y);
  out << "samples=" << y.samples.size() << " sample_rate=" << y.sample_rate << " clipped=" << clipped << "\n";
  return kExitOk;
}

int cmd_eval(const Options& o, std::ostream& out, std::ostream& err) {
  build_config(o);
  const auto codec = load_codec(resolve_checkpoint(o));
  const auto report = evaluate_directory(o.input, *codec, o.jobs);
  const auto text = report.to_text();
  out << text;
  if (!o.out.empty()) {
    std::ofstream f(o.out);
    require(static_cast<bool>(f), ErrorKind::kIo, "cannot write " + o.out);
    f << text;
  }
  if (!report.files.empty() && report.failed() == report.files.size()) {
    report_error(err, "all_failed", "every one of " + std::to_string(report.files.size()) + " files failed");
    return kExitAllFailed;
  }
  return kExitOk;
}

int cmd_dump_spectrum(const Options& o, std::ostream& out) {
  require_out(o, "dump-spectrum");
  const auto cfg = build_config(o);
  const auto x = read_wav(o.input);
  const auto s = mdct(x, cfg.mdct());
  write_spectrum_csv(o.out, s);
  out << "frames=" << s.frames() << " bins=" << s.bins() << "\n";
  return kExitOk;
}

template <typename T>
int train_loop(const CodecConfig& cfg, const Corpus& corpus, const Options& o, const fs::path& dir,
               std::ostream& out) {
  Trainer<T> trainer(cfg, &corpus);
  const bool resume = !o.checkpoint.empty();
  if (resume) {
    if (!fs::exists(o.checkpoint)) throw MissingCheckpoint{"checkpoint not found: " + o.checkpoint};
    trainer.load(o.checkpoint, o.force);
    spdlog::info("resumed from {} at step {}", o.checkpoint, trainer.steps_done());
  }
  const fs::path metrics_path = cfg.train.metrics_path.empty() ? dir / "metrics.log" : fs::path(cfg.train.metrics_path);
  std::ofstream metrics(metrics_path, resume ? std::ios::app : std::ios::trunc);
  require(static_cast<bool>(metrics), ErrorKind::kIo, "cannot write " + metrics_path.string());
  const auto latest = (dir / "latest.ckpt").string();
  while (trainer.steps_done() < cfg.train.total_steps) {
    const auto m = trainer.step();
    const auto line = m.to_line();
    metrics << line << "\n" << std::flush;
    if (m.step % cfg.train.log_every == 0) spdlog::info("{}", line);
    if (cfg.train.checkpoint_every && m.step % cfg.train.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "step_%08llu.ckpt", static_cast<unsigned long long>(m.step));
      const auto bytes = trainer.save_bytes();
      write_file_bytes((dir / name).string(), bytes);
      write_file_bytes(latest, bytes);
    }
  }
  trainer.save(latest);
  out << "steps=" << trainer.steps_done() << " checkpoint=" << latest
      << " fingerprint=" << hex(cfg.fingerprint()) << "\n";
  return kExitOk;
}

int cmd_train(const Options& o, std::ostream& out) {
  auto cfg = build_config(o);
  if (!o.input.empty()) cfg.train.corpus_dir = o.input;
  if (cfg.train.corpus_dir.empty()) throw CLI::RequiredError("train needs a corpus directory");
  fs::path dir = o.out;
  if (dir.empty()) dir = cfg.train.checkpoint_dir;
  if (dir.empty())
    if (const char* env = std::getenv(kCheckpointDirEnv); env && *env) dir = env;
  if (dir.empty()) dir = "checkpoints";
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorKind::kIo, "cannot create " + dir.string() + ": " + ec.message());
  const auto corpus = ingest_corpus(cfg.train.corpus_dir, cfg.sample_rate);
  spdlog::info("corpus: {} clips from {}", corpus.size(), cfg.train.corpus_dir);
  if (cfg.train.precision == Precision::kFloat32) return train_loop<float>(cfg, corpus, o, dir, out);
  return train_loop<double>(cfg, corpus, o, dir, out);
}

}  // namespace

double lsd(const Waveform& ref, const Waveform& test) {
  require(ref.samples.size() == test.samples.size(), ErrorKind::kContract,
          "lsd needs equal lengths, got " + std::to_string(ref.samples.size()) + " and " +
              std::to_string(test.samples.size()));
  require(ref.sample_rate == test.sample_rate, ErrorKind::kContract, "lsd needs equal sample rates");
  if (ref.samples.empty()) return 0.0;
  const auto a = magnitudes(ref.samples);
  const auto b = magnitudes(test.samples);
  double total = 0.0;
  for (std::size_t f = 0; f < a.size(); ++f) {
    double acc = 0.0;
    for (std::size_t k = 0; k < a[f].size(); ++k) {
      const double d = 20.0 * std::log10(a[f][k] / b[f][k]);
      acc += d * d;
    }
    total += std::sqrt(acc / static_cast<double>(a[f].size()));
  }
  return total / static_cast<double>(a.size());
}

std::size_t EvalReport::failed() const {
  return static_cast<std::size_t>(std::count_if(files.begin(), files.end(), [](const auto& f) { return !f.ok; }));
}

double EvalReport::mean_lsd() const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& f : files)
    if (f.ok) sum += f.lsd_db, ++n;
  return n ? sum / static_cast<double>(n) : 0.0;
}

double EvalReport::bitrate() const {
  double bits = 0.0, seconds = 0.0;
  for (const auto& f : files)
    if (f.ok) bits += static_cast<double>(f.payload_bits), seconds += f.duration;
  return seconds > 0 ? bits / seconds : 0.0;
}

double EvalReport::rtf() const {
  double wall = 0.0, seconds = 0.0;
  for (const auto& f : files)
    if (f.ok) wall += f.seconds, seconds += f.duration;
  return seconds > 0 ? wall / seconds : 0.0;
}

std::string EvalReport::to_text() const {
  std::string s;
  for (const auto& f : files) {
    s += "file=" + f.name;
    if (f.ok)
      s += " samples=" + std::to_string(f.samples) + " lsd_db=" + format_double(f.lsd_db) +
           " bitrate_bps=" + format_double(f.bitrate()) + " rtf=" + format_double(f.rtf()) + "\n";
    else
      s += " status=failed code=" + f.error_code + " message=" + f.error + "\n";
  }
  s += "summary files=" + std::to_string(files.size()) + " ok=" + std::to_string(files.size() - failed()) +
       " failed=" + std::to_string(failed()) + " mean_lsd_db=" + format_double(mean_lsd()) +
       " bitrate_bps=" + format_double(bitrate()) + " rtf=" + format_double(rtf()) + "\n";
  return s;
}

EvalReport evaluate_directory(const std::string& dir, const AudioCodec& codec, std::size_t jobs) {
  const auto paths = list_wavs(dir);
  EvalReport report;
  report.files.resize(paths.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < paths.size();) report.files[i] = evaluate_file(paths[i], dir, codec);
  };
  const std::size_t n = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(1, paths.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return report;
}

void write_spectrum_csv(const std::string& path, const MdctSpectrum& spectrum) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::kIo, "cannot write " + path);
  char buf[32];
  for (std::size_t n = 0; n < spectrum.frames(); ++n) {
    const auto row = spectrum.values.row(n);
    for (std::size_t k = 0; k < row.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", row[k]);
      out << (k ? "," : "") << buf;
    }
    out << "\n";
  }
  require(static_cast<bool>(out), ErrorKind::kIo, "short write to " + path);
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kIo: return kExitIo;
    case ErrorKind::kRateMismatch: return kExitRateMismatch;
    case ErrorKind::kUnsupported: return kExitUnsupported;
    case ErrorKind::kCorruptStream:
    case ErrorKind::kTruncatedStream:
    case ErrorKind::kIntegrity: return kExitCorruptStream;
    case ErrorKind::kFingerprintMismatch: return kExitFingerprint;
    case ErrorKind::kInvalidConfig: return kExitInvalidConfig;
    case ErrorKind::kDiverged: return kExitDiverged;
    default: return kExitOther;
  }
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"MDCT-domain neural audio codec"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--config", o.config_path, "config file of key=value lines");
  app.add_option("--set", o.sets, "override one config key (key=value), repeatable");
  app.add_option("--checkpoint", o.checkpoint, "checkpoint to load (train: resume from it)");
  app.add_option("--out", o.out, "output path (train: checkpoint directory)");
  app.add_option("--seed", o.seed, "override the config seed");
  app.add_option("--jobs", o.jobs, "eval worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--force", o.force, "accept a fingerprint mismatch");

  auto* train = app.add_subcommand("train", "train a model on a WAV corpus");
  train->add_option("corpus", o.input, "corpus directory (default: corpus_dir)");
  auto* encode = app.add_subcommand("encode", "WAV to bitstream");
  encode->add_option("input", o.input, "input WAV")->required();
  auto* decode = app.add_subcommand("decode", "bitstream to WAV");
  decode->add_option("input", o.input, "input bitstream")->required();
  auto* eval = app.add_subcommand("eval", "round-trip every WAV in a directory and report LSD");
  eval->add_option("dir", o.input, "directory of WAVs")->required();
  auto* dump = app.add_subcommand("dump-spectrum", "write the MDCT spectrum as CSV");
  dump->add_option("input", o.input, "input WAV")->required();

  try {
    app.parse(argc, argv);
    if (train->parsed()) return cmd_train(o, out);
    if (encode->parsed()) return cmd_encode(o, out);
    if (decode->parsed()) return cmd_decode(o, out);
    if (eval->parsed()) return cmd_eval(o, out, err);
    return cmd_dump_spectrum(o, out);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    report_error(err, "usage", e.what());
    return kExitUsage;
  } catch (const MissingCheckpoint& e) {
    report_error(err, "missing_checkpoint", e.message);
    return kExitMissingCheckpoint;
  } catch (const Error& e) {
    report_error(err, reason_code(e.kind()), e.what());
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    report_error(err, "internal", e.what());
    return kExitOther;
  }
}

}  // namespace mdctcodec
