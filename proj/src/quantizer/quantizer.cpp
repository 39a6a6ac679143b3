#include "mdctcodec/quantizer.hpp"

#include <bit>
#include <cmath>
#include <limits>

#include "mdctcodec/error.hpp"

namespace mdctcodec {

namespace {

// Index of the nearest center by squared Euclidean distance; lowest index on ties.
std::uint32_t argmin_distance(const double* point, const std::vector<double>& centers,
                              std::size_t count, std::size_t dim, double* best_out = nullptr) {
  std::uint32_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < count; ++m) {
    const double* c = centers.data() + m * dim;
    double d = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      const double e = point[j] - c[j];
      d += e * e;
    }
    if (d < best_d) {
      best_d = d;
      best = static_cast<std::uint32_t>(m);
    }
  }
  if (best_out) *best_out = best_d;
  return best;
}

std::vector<double> kmeans(const std::vector<double>& data, std::size_t n, std::size_t dim,
                           std::size_t k, std::size_t iterations, std::mt19937_64& rng) {
  std::vector<double> centers(k * dim, 0.0);
  if (n == 0) return centers;
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // k-means++ seeding.
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::size_t chosen = pick(rng);
  for (std::size_t c = 0; c < k; ++c) {
    std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(chosen * dim), dim,
                centers.begin() + static_cast<std::ptrdiff_t>(c * dim));
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double d = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        const double e = data[i * dim + j] - centers[c * dim + j];
        d += e * e;
      }
      dist[i] = std::min(dist[i], d);
      total += dist[i];
    }
    if (c + 1 == k) break;
    if (total <= 0.0) {
      chosen = pick(rng);
      continue;
    }
    const double target = unit(rng) * total;
    double acc = 0.0;
    chosen = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      acc += dist[i];
      if (acc > target) {
        chosen = i;
        break;
      }
    }
  }

  std::vector<std::uint32_t> assign(n);
  std::vector<double> sums(k * dim);
  std::vector<std::size_t> counts(k);
  for (std::size_t it = 0; it < iterations; ++it) {
    for (std::size_t i = 0; i < n; ++i)
      assign[i] = argmin_distance(data.data() + i * dim, centers, k, dim);
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[assign[i]];
      for (std::size_t j = 0; j < dim; ++j) sums[assign[i] * dim + j] += data[i * dim + j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its center
      for (std::size_t j = 0; j < dim; ++j)
        centers[c * dim + j] = sums[c * dim + j] / static_cast<double>(counts[c]);
    }
  }
  return centers;
}

}  // namespace

void RvqConfig::validate() const {
  require(num_quantizers >= 1, ErrorKind::kInvalidConfig, "RVQ needs at least one quantizer");
  require(codebook_size >= 2 && std::has_single_bit(codebook_size), ErrorKind::kInvalidConfig,
          "codebook size must be a power of two >= 2, got " + std::to_string(codebook_size));
  require(codebook_size <= (std::size_t{1} << 16), ErrorKind::kInvalidConfig,
          "codebook size above 65536 is not supported");
  require(code_dim >= 1, ErrorKind::kInvalidConfig, "code dimension must be positive");
}

std::size_t RvqConfig::bits_per_index() const {
  return static_cast<std::size_t>(std::countr_zero(codebook_size));
}

double bitrate_bps(double sample_rate, std::size_t frame_shift, std::size_t rate,
                   std::size_t num_quantizers, std::size_t codebook_size) {
  require(sample_rate > 0.0 && frame_shift > 0 && rate > 0 && num_quantizers > 0,
          ErrorKind::kInvalidConfig, "bitrate inputs must be positive");
  require(codebook_size >= 2, ErrorKind::kInvalidConfig, "codebook size must be >= 2");
  return sample_rate / static_cast<double>(frame_shift * rate) *
         static_cast<double>(num_quantizers) * std::log2(static_cast<double>(codebook_size));
}

template <typename T>
ResidualVq<T>::ResidualVq(const RvqConfig& cfg, std::mt19937_64& rng) : cfg_(cfg) {
  cfg_.validate();
  for (std::size_t q = 0; q < cfg.num_quantizers; ++q) {
    codebooks.push_back(normal_parameter<T>({cfg.codebook_size, cfg.code_dim}, kInitStddev, rng));
    idle.emplace_back(cfg.codebook_size, 0u);
  }
}

template <typename T>
void ResidualVq<T>::nearest(const T* rows, std::size_t count, std::size_t stage,
                            std::uint32_t* idx) const {
  const std::size_t dim = cfg_.code_dim, size = cfg_.codebook_size;
  const auto& vals = codebooks[stage].values();
  std::vector<double> centers(vals.begin(), vals.end());
  std::vector<double> point(dim);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = 0; j < dim; ++j) point[j] = static_cast<double>(rows[i * dim + j]);
    idx[i] = argmin_distance(point.data(), centers, size, dim);
  }
}

template <typename T>
RvqOutput<T> ResidualVq<T>::quantize(const Tensor<T>& code) const {
  const std::size_t dim = cfg_.code_dim, stages = cfg_.num_quantizers;
  require(code.dim() >= 1 && code.shape().back() == dim, ErrorKind::kShape,
          "RVQ expects trailing width " + std::to_string(dim) + ", got " + shape_string(code.shape()));
  const std::size_t rows = code.numel() / dim;

  RvqOutput<T> out;
  out.tokens.assign(rows * stages, 0);
  auto residual = reshape(code, {rows, dim});
  std::vector<T> value(rows * dim, T(0));
  std::vector<std::uint32_t> idx(rows);
  std::vector<std::size_t> gather_idx(rows);
  Tensor<T> cb_total, com_total;

  const auto energy = [&](std::span<const T> r) {
    double e = 0.0;
    for (T v : r) e += static_cast<double>(v) * static_cast<double>(v);
    return r.empty() ? 0.0 : e / static_cast<double>(r.size());
  };

  for (std::size_t q = 0; q < stages; ++q) {
    out.residual_energy.push_back(energy(residual.data()));
    out.stage_residuals.emplace_back(residual.values());
    nearest(residual.data().data(), rows, q, idx.data());
    for (std::size_t i = 0; i < rows; ++i) {
      out.tokens[i * stages + q] = idx[i];
      gather_idx[i] = idx[i];
    }

    const auto picked = gather_rows(codebooks[q], std::span<const std::size_t>(gather_idx));
    const auto picked_const = picked.detach();
    const auto cb = mean(square(sub(picked, residual.detach())));
    const auto com = mean(square(sub(residual, picked_const)));
    cb_total = cb_total.defined() ? add(cb_total, cb) : cb;
    com_total = com_total.defined() ? add(com_total, com) : com;

    const auto& pv = picked.values();
    for (std::size_t i = 0; i < value.size(); ++i) value[i] += pv[i];
    residual = sub(residual, picked_const);
  }
  out.residual_energy.push_back(energy(residual.data()));

  const T inv = T(1) / static_cast<T>(stages);
  out.codebook_loss = mul_scalar(cb_total, inv);
  out.commitment_loss = mul_scalar(com_total, inv);
  out.quantized = straight_through(Tensor<T>(code.shape(), std::move(value)), code);
  return out;
}

template <typename T>
std::vector<T> ResidualVq<T>::dequantize(std::span<const std::uint32_t> tokens) const {
  const std::size_t dim = cfg_.code_dim, stages = cfg_.num_quantizers;
  require(tokens.size() % stages == 0, ErrorKind::kCorruptStream,
          "token count is not a multiple of the quantizer count");
  const std::size_t rows = tokens.size() / stages;
  std::vector<T> value(rows * dim, T(0));
  for (std::size_t q = 0; q < stages; ++q) {
    const auto& book = codebooks[q].values();
    for (std::size_t i = 0; i < rows; ++i) {
      const std::uint32_t t = tokens[i * stages + q];
      require(t < cfg_.codebook_size, ErrorKind::kCorruptStream,
              "token " + std::to_string(t) + " out of range for codebook size " +
                  std::to_string(cfg_.codebook_size));
      for (std::size_t j = 0; j < dim; ++j) value[i * dim + j] += book[t * dim + j];
    }
  }
  return value;
}

template <typename T>
Tensor<T> ResidualVq<T>::dequantize(std::span<const std::uint32_t> tokens, Shape shape) const {
  auto v = dequantize(tokens);
  require(shape_numel(shape) == v.size(), ErrorKind::kShape,
          "dequantize target shape " + shape_string(shape) + " does not match token count");
  return Tensor<T>(std::move(shape), std::move(v));
}

template <typename T>
void ResidualVq<T>::initialize(const Tensor<T>& code, std::mt19937_64& rng) {
  const std::size_t dim = cfg_.code_dim, size = cfg_.codebook_size;
  require(code.dim() >= 1 && code.shape().back() == dim, ErrorKind::kShape,
          "RVQ init expects trailing width " + std::to_string(dim));
  const std::size_t rows = code.numel() / dim;
  std::vector<double> residual(code.values().begin(), code.values().end());
  for (std::size_t q = 0; q < cfg_.num_quantizers; ++q) {
    const auto centers = kmeans(residual, rows, dim, size, cfg_.kmeans_iterations, rng);
    auto book = codebooks[q].data();
    for (std::size_t i = 0; i < book.size(); ++i) book[i] = static_cast<T>(centers[i]);
    // Residuals for the next stage use the stored (possibly rounded) codes.
    const std::vector<double> stored(book.begin(), book.end());
    for (std::size_t i = 0; i < rows; ++i) {
      double* p = residual.data() + i * dim;
      const auto m = argmin_distance(p, stored, size, dim);
      for (std::size_t j = 0; j < dim; ++j) p[j] -= stored[m * dim + j];
    }
    std::fill(idle[q].begin(), idle[q].end(), 0u);
  }
  initialized_ = true;
}

template <typename T>
std::size_t ResidualVq<T>::update_usage(const RvqOutput<T>& out, std::mt19937_64& rng) {
  const std::size_t dim = cfg_.code_dim, stages = cfg_.num_quantizers;
  const std::size_t rows = out.tokens.size() / stages;
  std::size_t revived = 0;
  std::vector<char> used(cfg_.codebook_size);
  for (std::size_t q = 0; q < stages; ++q) {
    std::fill(used.begin(), used.end(), 0);
    for (std::size_t i = 0; i < rows; ++i) used[out.tokens[i * stages + q]] = 1;
    auto book = codebooks[q].data();
    for (std::size_t m = 0; m < cfg_.codebook_size; ++m) {
      idle[q][m] = used[m] ? 0u : idle[q][m] + 1u;
      if (idle[q][m] < cfg_.dead_code_steps || rows == 0) continue;
      std::uniform_int_distribution<std::size_t> pick(0, rows - 1);
      const std::size_t r = pick(rng);
      std::copy_n(out.stage_residuals[q].begin() + static_cast<std::ptrdiff_t>(r * dim), dim,
                  book.begin() + static_cast<std::ptrdiff_t>(m * dim));
      idle[q][m] = 0;
      ++revived;
    }
  }
  return revived;
}

template <typename T>
void ResidualVq<T>::collect(const std::string& prefix, NamedTensors<T>& out) const {
  for (std::size_t q = 0; q < codebooks.size(); ++q)
    out.emplace_back(prefix + ".codebook" + std::to_string(q), codebooks[q]);
}

template class ResidualVq<float>;
template class ResidualVq<double>;

}  // namespace mdctcodec
