#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace mdctcodec {

struct Corpus {
  std::uint32_t sample_rate = 48000;
  std::vector<std::string> names;
  std::vector<std::vector<float>> clips;

  std::size_t size() const { return clips.size(); }
};

// WAV files under `dir` (recursively, sorted by path) or, when `manifest` is
// non-empty, the paths it lists relative to `dir`. Unreadable files and files
// at another rate are skipped with a warning; an empty result is an error.
Corpus ingest_corpus(const std::string& dir, std::uint32_t sample_rate,
                     const std::string& manifest = {});

struct DatasetCursor {
  std::uint64_t epoch = 0;
  std::uint64_t position = 0;
  bool operator==(const DatasetCursor&) const = default;
};

struct Batch {
  std::size_t batch_size = 0;
  std::size_t segment = 0;
  std::vector<double> samples;  // [batch_size, segment]
  std::uint64_t epoch = 0;      // epoch of the first crop
};

// Shuffled passes over a crop list holding max(1, len / segment) entries per
// clip. The order and every crop start derive from (seed, epoch, position),
// so a cursor fully determines the stream.
class CropSampler {
 public:
  CropSampler(const Corpus& corpus, std::size_t segment, std::uint64_t seed);

  Batch next(std::size_t batch_size);

  const DatasetCursor& cursor() const { return cursor_; }
  void set_cursor(const DatasetCursor& c);
  std::size_t crops_per_epoch() const { return owners_.size(); }

 private:
  void shuffle_for_epoch();

  const Corpus* corpus_;
  std::size_t segment_;
  std::uint64_t seed_;
  std::vector<std::size_t> owners_;  // clip index per crop
  std::vector<std::size_t> order_;
  DatasetCursor cursor_;
};

}  // namespace mdctcodec
