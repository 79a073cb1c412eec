#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ppft/error.hpp"
#include "ppft/matrix.hpp"
#include "ppft/pooling.hpp"
#include "ppft/rng.hpp"

namespace ppft {

// Isotropic l2-Laplace obfuscation.
//
// The noise density is p(n) ∝ exp(-eps * ||n||_2), sampled as a uniform
// direction on the unit sphere times a Gamma(shape d_e, rate eps) radius.
// Adding it to a slot vector u gives a mechanism whose log-density ratio
// between any two centers u, u' is bounded by eps * ||u - u'||_2 (metric DP
// in the l2 metric); the final unit renormalization is deterministic
// post-processing and cannot weaken that bound.

enum class Mechanism : std::uint8_t { None = 0, L2Laplace = 1, Gaussian = 2 };

inline const char* to_string(Mechanism m) {
  switch (m) {
    case Mechanism::None: return "none";
    case Mechanism::L2Laplace: return "laplace";
    case Mechanism::Gaussian: return "gaussian";
  }
  return "unknown";
}

inline Mechanism mechanism_from_string(const std::string& s) {
  if (s == "none") return Mechanism::None;
  if (s == "laplace") return Mechanism::L2Laplace;
  if (s == "gaussian") return Mechanism::Gaussian;
  raise(ErrorCode::ParseError, "unknown mechanism '" + s + "'");
}

struct NoiseConfig {
  Mechanism mechanism = Mechanism::L2Laplace;
  double epsilon = 75.0;  // Gamma rate for L2Laplace; scale calibration for Gaussian
  int d_e = 0;
  bool renormalize = true;
  std::uint64_t seed = 0;
};

inline void validate(const NoiseConfig& cfg) {
  if (cfg.d_e < 2) raise(ErrorCode::BadDimension, "noise: d_e must be >= 2");
  if (cfg.mechanism != Mechanism::None && !(cfg.epsilon > 0.0)) {
    raise(ErrorCode::BadBudget, "noise: epsilon must be positive");
  }
}

struct ObfuscatedEmbeddings {
  Matrix slots;  // m x d_e; unit-norm rows when config_echo.renormalize
  NoiseConfig config_echo;
  std::uint16_t k_echo = 1;  // pooling size carried through to the wire header

  std::size_t m() const { return slots.rows(); }
  std::size_t d_e() const { return slots.cols(); }
};

// r * v with v uniform on the unit sphere and r ~ Gamma(shape d_e, rate eps).
inline std::vector<double> sample_l2_laplace(int d_e, double epsilon, CounterRng& rng) {
  if (d_e < 2) raise(ErrorCode::BadDimension, "sample_l2_laplace: d_e must be >= 2");
  if (!(epsilon > 0.0)) raise(ErrorCode::BadBudget, "sample_l2_laplace: epsilon must be positive");
  std::vector<double> noise(static_cast<std::size_t>(d_e));
  rng.fill_sphere(noise);
  const double radius = rng.next_gamma(static_cast<double>(d_e), epsilon);
  for (double& x : noise) x *= radius;
  return noise;
}

// Per-coordinate sigma that equates E||N||^2 with the l2-Laplace mechanism
// at the same eps: E[r^2] = d_e(d_e+1)/eps^2, so sigma = sqrt(d_e+1)/eps.
inline double gaussian_sigma(int d_e, double epsilon) {
  return std::sqrt(static_cast<double>(d_e) * (static_cast<double>(d_e) + 1.0)) /
         (epsilon * std::sqrt(static_cast<double>(d_e)));
}

inline std::vector<double> sample_gaussian(int d_e, double epsilon, CounterRng& rng) {
  if (d_e < 2) raise(ErrorCode::BadDimension, "sample_gaussian: d_e must be >= 2");
  if (!(epsilon > 0.0)) raise(ErrorCode::BadBudget, "sample_gaussian: epsilon must be positive");
  const double sigma = gaussian_sigma(d_e, epsilon);
  std::vector<double> noise(static_cast<std::size_t>(d_e));
  for (double& x : noise) x = sigma * rng.next_normal();
  return noise;
}

// Obfuscate every slot independently: slot j draws from the stream
// (cfg.seed, first_slot_index + j), so its output does not depend on m and
// slots may be processed in any order or in parallel.
inline ObfuscatedEmbeddings obfuscate(const PooledEmbeddings& U, const NoiseConfig& cfg,
                                      std::uint64_t first_slot_index = 0) {
  validate(cfg);
  if (U.slots.empty()) raise(ErrorCode::EmptyInput, "obfuscate: empty input");
  if (static_cast<std::size_t>(cfg.d_e) != U.slots.cols()) {
    raise(ErrorCode::ShapeError, "obfuscate: cfg.d_e does not match slot width");
  }
  if (!U.slots.all_finite()) raise(ErrorCode::ShapeError, "obfuscate: non-finite input");

  ObfuscatedEmbeddings out;
  out.slots = Matrix(U.slots.rows(), U.slots.cols());
  out.config_echo = cfg;
  out.k_echo = static_cast<std::uint16_t>(U.k);

  std::vector<double> y(U.slots.cols());
  for (std::size_t j = 0; j < U.slots.rows(); ++j) {
    CounterRng rng(cfg.seed, first_slot_index + j);
    auto u = U.slots.row(j);
    for (;;) {
      switch (cfg.mechanism) {
        case Mechanism::None:
          for (std::size_t c = 0; c < y.size(); ++c) y[c] = u[c];
          break;
        case Mechanism::L2Laplace: {
          auto noise = sample_l2_laplace(cfg.d_e, cfg.epsilon, rng);
          for (std::size_t c = 0; c < y.size(); ++c) y[c] = u[c] + noise[c];
          break;
        }
        case Mechanism::Gaussian: {
          auto noise = sample_gaussian(cfg.d_e, cfg.epsilon, rng);
          for (std::size_t c = 0; c < y.size(); ++c) y[c] = u[c] + noise[c];
          break;
        }
      }
      if (!cfg.renormalize) break;
      const double norm = l2_norm(y);
      if (norm > 0.0) {
        const double inv = 1.0 / norm;
        for (double& v : y) v *= inv;
        break;
      }
      if (cfg.mechanism == Mechanism::None) {
        raise(ErrorCode::DegenerateSlot, "obfuscate: zero-norm slot cannot be renormalized");
      }
      // ||u + N|| == 0: resample (probability-zero event)
    }
    auto dst = out.slots.row(j);
    for (std::size_t c = 0; c < y.size(); ++c) dst[c] = y[c];
  }
  return out;
}

// Exact log-likelihood ratio ln p(y|u) - ln p(y|u') of the pre-normalization
// mechanism; the Gamma normalization constants cancel. By the reverse
// triangle inequality the result lies in [-eps*||u-u'||, eps*||u-u'||].
inline double log_density_ratio(std::span<const double> y, std::span<const double> u,
                                std::span<const double> u_prime, double epsilon) {
  if (y.size() != u.size() || u.size() != u_prime.size()) {
    raise(ErrorCode::ShapeError, "log_density_ratio: dimension mismatch");
  }
  return epsilon * (l2_dist(y, u_prime) - l2_dist(y, u));
}

}  // namespace ppft
