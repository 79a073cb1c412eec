#pragma once

#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ppft/error.hpp"
#include "ppft/noise.hpp"
#include "ppft/pooling.hpp"
#include "ppft/rng.hpp"
#include "ppft/vocab.hpp"

namespace ppft {

// Unified privacy-budget accounting.
//
// All mechanisms are aligned to one global worst-case log-loss target B:
//   token-wise d_chi privatization composes over n tokens with per-token
//     distance bound D_max            -> eps_token = B / (n * D_max)
//   paraphrase temperature proxy rule  2n / tau = B -> tau = 2n / B
//   per-vector mechanisms on unit-norm vectors have ||u-u'|| <= 2, so a
//     worst-case per-vector log-loss of B gives eps_vector = B / 2.

struct BudgetSpec {
  double B = 150.0;
  double n = 1.0;      // sequence length; dataset averages make this real-valued
  double d_max = 2.0;  // per-token distance upper bound
  int d_e = 0;         // optional, informational
};

struct CalibratedParams {
  double eps_dchi = 0.0;
  double tau = 0.0;
  double eps_vector = 0.0;
};

inline CalibratedParams calibrate(const BudgetSpec& spec) {
  if (!(spec.B > 0.0) || !(spec.n >= 1.0) || !(spec.d_max > 0.0)) {
    raise(ErrorCode::BadBudget, "calibrate: require B > 0, n >= 1, D_max > 0");
  }
  CalibratedParams p;
  p.eps_dchi = spec.B / (spec.n * spec.d_max);
  p.tau = 2.0 * spec.n / spec.B;
  p.eps_vector = spec.B / 2.0;
  return p;
}

// Display rounding: half-to-even at `digits` decimals. Internal values stay
// unrounded; tables round only when printed.
inline double round_half_even(double x, int digits = 3) {
  const double scale = std::pow(10.0, digits);
  return std::nearbyint(x * scale) / scale;  // FE_TONEAREST ties to even
}

struct BudgetRow {
  std::string dataset;
  double n = 0.0;
  double d_max = 0.0;
};

// Reference per-dataset accounting inputs at B = 150.
inline std::vector<BudgetRow> reference_budget_rows() {
  return {
      {"Pri-DDXP", 106.00, 1.64},
      {"Pri-NLICE", 72.00, 1.39},
      {"Pri-SLJA", 193.00, 1.45},
      {"SQuAD", 178.78, 1.70},
      {"CSQA", 48.43, 1.68},
  };
}

inline nlohmann::json budget_table_json(double B, const std::vector<BudgetRow>& rows) {
  nlohmann::json out;
  out["B"] = B;
  out["eps_vector"] = round_half_even(B / 2.0);
  out["rows"] = nlohmann::json::array();
  for (const auto& row : rows) {
    const auto p = calibrate({B, row.n, row.d_max});
    out["rows"].push_back({{"dataset", row.dataset},
                           {"n", row.n},
                           {"d_max", row.d_max},
                           {"eps_dchi", round_half_even(p.eps_dchi)},
                           {"tau", round_half_even(p.tau)}});
  }
  return out;
}

struct CompositionQuery {
  double epsilon = 0.0;
  std::uint64_t s = 0;  // number of differing slots (worst-case path)
  std::optional<std::vector<double>> slot_dists;
  bool unit_norm = true;  // slot vectors claimed unit-norm => dists must lie in [0, 2]
};

// Worst-case log-loss of the slot-sequence mechanism: eps * sum_j d_j when
// the actual slot distances are known, else the unit-norm bound 2 * eps * s.
inline double composition_bound(const CompositionQuery& q) {
  if (q.epsilon < 0.0) raise(ErrorCode::BadBudget, "composition_bound: negative epsilon");
  if (!q.slot_dists) return 2.0 * q.epsilon * static_cast<double>(q.s);
  double sum = 0.0;
  for (double d : *q.slot_dists) {
    if (d < 0.0 || (q.unit_norm && d > 2.0 + 1e-12)) {
      raise(ErrorCode::BoundViolation,
            "composition_bound: slot distance " + std::to_string(d) + " outside [0, 2]");
    }
    sum += d;
  }
  return q.epsilon * sum;
}

// Samples pre-normalization outputs Y of the l2-Laplace mechanism centred at
// U and returns the maximum observed total log-density ratio against U'.
// Never exceeds composition_bound with the actual slot distances.
inline double empirical_composition_check(const PooledEmbeddings& U, const PooledEmbeddings& U_prime,
                                          double epsilon, int trials, std::uint64_t seed) {
  if (U.slots.rows() != U_prime.slots.rows() || U.slots.cols() != U_prime.slots.cols()) {
    raise(ErrorCode::ShapeError, "empirical_composition_check: shape mismatch");
  }
  if (trials < 1) raise(ErrorCode::EmptyInput, "empirical_composition_check: trials must be >= 1");
  if (!(epsilon > 0.0)) raise(ErrorCode::BadBudget, "empirical_composition_check: epsilon must be positive");

  const std::size_t m = U.slots.rows();
  const int d_e = static_cast<int>(U.slots.cols());
  double max_total = -std::numeric_limits<double>::infinity();
  std::vector<double> y(U.slots.cols());
  for (int t = 0; t < trials; ++t) {
    double total = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      CounterRng rng(seed, (static_cast<std::uint64_t>(t) << 32) | j);
      auto noise = sample_l2_laplace(d_e, epsilon, rng);
      auto u = U.slots.row(j);
      for (std::size_t c = 0; c < y.size(); ++c) y[c] = u[c] + noise[c];
      total += log_density_ratio(y, u, U_prime.slots.row(j), epsilon);
    }
    max_total = std::max(max_total, total);
  }
  return max_total;
}

// Max pairwise token distance: exhaustive when |vocab|^2 <= 1e6, otherwise a
// seeded sample of `sample_pairs` pairs (the pair count is logged).
inline double estimate_dmax(const TokenVocab& vocab, std::size_t sample_pairs, std::uint64_t seed) {
  const std::size_t v = vocab.size();
  if (v < 2) raise(ErrorCode::NeedTwoTokens, "estimate_dmax: vocab must have >= 2 tokens");
  double best = 0.0;
  if (v * v <= 1000000) {
    for (std::size_t i = 0; i < v; ++i) {
      for (std::size_t j = i + 1; j < v; ++j) {
        best = std::max(best, l2_dist(vocab.table.row(i), vocab.table.row(j)));
      }
    }
    return best;
  }
  CounterRng rng(seed, /*stream=*/0x646d6178ull);  // "dmax"
  std::clog << "estimate_dmax: sampling " << sample_pairs << " of " << v * (v - 1) / 2
            << " pairs\n";
  for (std::size_t t = 0; t < sample_pairs; ++t) {
    const std::size_t i = rng.next_u64() % v;
    std::size_t j = rng.next_u64() % (v - 1);
    if (j >= i) ++j;
    best = std::max(best, l2_dist(vocab.table.row(i), vocab.table.row(j)));
  }
  return best;
}

}  // namespace ppft
