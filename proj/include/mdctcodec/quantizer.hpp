#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mdctcodec/layers.hpp"

namespace mdctcodec {

struct RvqConfig {
  std::size_t num_quantizers = 4;   // Q
  std::size_t codebook_size = 1024; // M
  std::size_t code_dim = 32;        // K'
  std::size_t dead_code_steps = 200;
  std::size_t kmeans_iterations = 10;

  void validate() const;
  std::size_t bits_per_index() const;  // log2 M
  bool operator==(const RvqConfig&) const = default;
};

// S / (W_S * R) * Q * log2 M.
double bitrate_bps(double sample_rate, std::size_t frame_shift, std::size_t rate,
                   std::size_t num_quantizers, std::size_t codebook_size);

template <typename T>
struct RvqOutput {
  Tensor<T> quantized;                // same shape as the input; straight-through to it
  std::vector<std::uint32_t> tokens;  // [rows, Q] row-major, rows = B * L
  Tensor<T> codebook_loss;
  Tensor<T> commitment_loss;
  std::vector<double> residual_energy;  // mean squared residual entering each stage, plus the final one
  std::vector<std::vector<T>> stage_residuals;  // values entering stage q, [rows * K']
};

template <typename T>
class ResidualVq {
 public:
  ResidualVq() = default;
  ResidualVq(const RvqConfig& cfg, std::mt19937_64& rng);

  const RvqConfig& config() const { return cfg_; }

  // code[..., K'] -> tokens and the quantized code.
  RvqOutput<T> quantize(const Tensor<T>& code) const;
  // tokens [rows, Q] -> values [rows, K], summed in stage order.
  std::vector<T> dequantize(std::span<const std::uint32_t> tokens) const;
  Tensor<T> dequantize(std::span<const std::uint32_t> tokens, Shape shape) const;

  // k-means++ seeding plus Lloyd iterations on each stage's residuals.
  void initialize(const Tensor<T>& code, std::mt19937_64& rng);
  bool initialized() const { return initialized_; }
  void set_initialized(bool flag) { initialized_ = flag; }

  // Per-code idle counters; codes idle for dead_code_steps are reset to a
  // random residual of their stage. Returns the number of revived codes.
  std::size_t update_usage(const RvqOutput<T>& out, std::mt19937_64& rng);

  void collect(const std::string& prefix, NamedTensors<T>& out) const;

  std::vector<Tensor<T>> codebooks;                 // Q x [M, K']
  std::vector<std::vector<std::uint32_t>> idle;     // Q x M

 private:
  void nearest(const T* rows, std::size_t count, std::size_t stage, std::uint32_t* idx) const;

  RvqConfig cfg_;
  bool initialized_ = false;
};

}  // namespace mdctcodec
