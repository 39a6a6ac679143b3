#include "mdctcodec/dataset.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

#include "mdctcodec/error.hpp"
#include "mdctcodec/wav.hpp"

namespace mdctcodec {

namespace fs = std::filesystem;

namespace {

bool is_wav(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".wav";
}

std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

Corpus ingest_corpus(const std::string& dir, std::uint32_t sample_rate, const std::string& manifest) {
  require(fs::is_directory(dir), ErrorKind::kIo, "corpus directory not found: " + dir);
  std::vector<fs::path> paths;
  if (manifest.empty()) {
    for (const auto& e : fs::recursive_directory_iterator(dir))
      if (e.is_regular_file() && is_wav(e.path())) paths.push_back(e.path());
    std::sort(paths.begin(), paths.end());
  } else {
    std::ifstream in(manifest);
    require(static_cast<bool>(in), ErrorKind::kIo, "cannot read split manifest " + manifest);
    for (std::string line; std::getline(in, line);) {
      while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
      if (!line.empty() && line[0] != '#') paths.push_back(fs::path(dir) / line);
    }
  }

  Corpus corpus;
  corpus.sample_rate = sample_rate;
  for (const auto& p : paths) {
    try {
      const auto w = read_wav(p.string());
      if (w.sample_rate != sample_rate) {
        spdlog::warn("skipping {}: rate mismatch ({} Hz, expected {} Hz)", p.string(), w.sample_rate,
                     sample_rate);
        continue;
      }
      if (w.samples.empty()) {
        spdlog::warn("skipping {}: no samples", p.string());
        continue;
      }
      corpus.names.push_back(p.string());
      corpus.clips.emplace_back(w.samples.begin(), w.samples.end());
    } catch (const Error& e) {
      spdlog::warn("skipping unreadable file: {}", e.what());
    }
  }
  require(!corpus.clips.empty(), ErrorKind::kIo, "corpus is empty: no usable WAV files under " + dir);
  return corpus;
}

CropSampler::CropSampler(const Corpus& corpus, std::size_t segment, std::uint64_t seed)
    : corpus_(&corpus), segment_(segment), seed_(seed) {
  require(corpus.size() > 0, ErrorKind::kIo, "corpus is empty");
  require(segment > 0, ErrorKind::kInvalidConfig, "segment length must be positive");
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const std::size_t n = std::max<std::size_t>(1, corpus.clips[i].size() / segment);
    owners_.insert(owners_.end(), n, i);
  }
  shuffle_for_epoch();
}

void CropSampler::shuffle_for_epoch() {
  order_.resize(owners_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  auto rng = derived_rng(seed_, cursor_.epoch, ~std::uint64_t{0});
  std::shuffle(order_.begin(), order_.end(), rng);
}

void CropSampler::set_cursor(const DatasetCursor& c) {
  require(c.position <= owners_.size(), ErrorKind::kIntegrity, "dataset cursor beyond crop list");
  cursor_ = c;
  shuffle_for_epoch();
}

Batch CropSampler::next(std::size_t batch_size) {
  Batch b;
  b.batch_size = batch_size;
  b.segment = segment_;
  b.samples.assign(batch_size * segment_, 0.0);
  for (std::size_t i = 0; i < batch_size; ++i) {
    if (cursor_.position == owners_.size()) {
      ++cursor_.epoch;
      cursor_.position = 0;
      shuffle_for_epoch();
    }
    if (i == 0) b.epoch = cursor_.epoch;
    const auto& clip = corpus_->clips[owners_[order_[cursor_.position]]];
    auto rng = derived_rng(seed_, cursor_.epoch, cursor_.position);
    std::size_t start = 0;
    if (clip.size() > segment_) {
      std::uniform_int_distribution<std::size_t> pick(0, clip.size() - segment_);
      start = pick(rng);
    }
    const std::size_t n = std::min(segment_, clip.size() - start);
    std::copy_n(clip.begin() + static_cast<std::ptrdiff_t>(start), n,
                b.samples.begin() + static_cast<std::ptrdiff_t>(i * segment_));
    ++cursor_.position;
  }
  return b;
}

}  // namespace mdctcodec
