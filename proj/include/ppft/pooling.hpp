#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

#include "ppft/error.hpp"
#include "ppft/matrix.hpp"

namespace ppft {

struct PoolConfig {
  int k = 1;
  // Rescale every pooled slot to unit l2 norm. Off in the standalone API;
  // the transmission pipeline turns it on so slot distances stay <= 2.
  bool clip_to_unit = false;
};

struct BlockRange {
  std::size_t begin = 0;  // 0-based, half-open [begin, end)
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
};

struct PooledEmbeddings {
  Matrix slots;  // m x d_e
  std::vector<BlockRange> blocks;
  int k = 1;
  bool clipped = false;
  std::size_t source_rows = 0;

  std::size_t m() const { return slots.rows(); }
  std::size_t d_e() const { return slots.cols(); }
};

// Block-wise mean pooling: slot j is the mean of rows [j*k, min((j+1)*k, n)),
// i.e. blocks of size k with a possibly-short final block averaged over its
// true size. Accumulation is left-to-right in double so results are stable
// across runs.
inline PooledEmbeddings k_pool(const Matrix& H, const PoolConfig& cfg) {
  if (H.rows() == 0 || H.cols() == 0) raise(ErrorCode::EmptyInput, "k_pool: empty matrix");
  if (cfg.k < 1) raise(ErrorCode::ShapeError, "k_pool: k must be >= 1");
  if (!H.all_finite()) raise(ErrorCode::ShapeError, "k_pool: non-finite input");

  const std::size_t n = H.rows();
  const std::size_t k = static_cast<std::size_t>(cfg.k);
  const std::size_t m = (n + k - 1) / k;

  PooledEmbeddings out;
  out.slots = Matrix(m, H.cols());
  out.blocks.reserve(m);
  out.k = cfg.k;
  out.clipped = cfg.clip_to_unit;
  out.source_rows = n;

  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t begin = j * k;
    const std::size_t end = std::min(begin + k, n);
    out.blocks.push_back({begin, end});
    auto slot = out.slots.row(j);
    for (std::size_t i = begin; i < end; ++i) {
      auto src = H.row(i);
      for (std::size_t c = 0; c < src.size(); ++c) slot[c] += src[c];
    }
    const double inv = 1.0 / static_cast<double>(end - begin);
    for (double& v : slot) v *= inv;
    if (cfg.clip_to_unit) {
      const double norm = l2_norm(slot);
      if (norm < 1e-9) {
        raise(ErrorCode::DegenerateSlot, "k_pool: slot " + std::to_string(j) +
                                             " has near-zero norm; refusing to rescale");
      }
      const double scale = 1.0 / norm;
      for (double& v : slot) v *= scale;
    }
  }
  return out;
}

struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  friend bool operator==(const Rational&, const Rational&) = default;
};

// Compression ratio m/n = ceil(n/k)/n in lowest terms.
inline Rational unpool_info_ratio(std::int64_t n, std::int64_t k) {
  if (n < 1) raise(ErrorCode::EmptyInput, "unpool_info_ratio: n must be >= 1");
  if (k < 1) raise(ErrorCode::ShapeError, "unpool_info_ratio: k must be >= 1");
  const std::int64_t m = (n + k - 1) / k;
  const std::int64_t g = std::gcd(m, n);
  return {m / g, n / g};
}

}  // namespace ppft
