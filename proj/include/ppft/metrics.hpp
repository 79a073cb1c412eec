#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ppft/text.hpp"

namespace ppft {

// Longest common subsequence length, classic DP on a single rolling row.
// Short second sequences run allocation-free on a stack buffer.
template <typename Seq>
std::size_t lcs_length(const Seq& a, const Seq& b) {
  const std::size_t na = a.size();
  const std::size_t nb = b.size();
  if (na == 0 || nb == 0) return 0;
  std::size_t stack_row[64];
  std::vector<std::size_t> heap_row;
  std::size_t* row;
  if (nb < 64) {
    row = stack_row;
    for (std::size_t j = 0; j <= nb; ++j) row[j] = 0;
  } else {
    heap_row.assign(nb + 1, 0);
    row = heap_row.data();
  }
  for (std::size_t i = 1; i <= na; ++i) {
    std::size_t diag = 0;  // row[j-1] from the previous iteration of i
    for (std::size_t j = 1; j <= nb; ++j) {
      const std::size_t up = row[j];
      row[j] = (a[i - 1] == b[j - 1]) ? diag + 1 : std::max(up, row[j - 1]);
      diag = up;
    }
  }
  return row[nb];
}

// ROUGE-L F-measure on token sequences: with L = LCS(ref, hyp),
// P = L/|hyp|, R = L/|ref| (each 0 on an empty denominator) and
// F = 2PR/(P+R), 0 when P + R = 0.
template <typename Seq>
double rouge_l(const Seq& reference, const Seq& hypothesis) {
  const double l = static_cast<double>(lcs_length(reference, hypothesis));
  const double p = hypothesis.size() ? l / static_cast<double>(hypothesis.size()) : 0.0;
  const double r = reference.size() ? l / static_cast<double>(reference.size()) : 0.0;
  return (p + r > 0.0) ? 2.0 * p * r / (p + r) : 0.0;
}

using Annotations = std::map<std::string, std::vector<std::string>>;

// Per-attribute recall: the fraction of gold items whose normalized token
// run occurs contiguously in the normalized reconstruction. Attributes with
// no gold items are omitted.
inline std::map<std::string, double> attribute_recall(const Annotations& gold,
                                                      std::string_view reconstruction) {
  const std::vector<std::string> recon = normalize_tokens(reconstruction);
  std::map<std::string, double> recall;
  for (const auto& [name, items] : gold) {
    if (items.empty()) continue;
    std::size_t hit = 0;
    for (const auto& item : items) {
      if (contains_token_run(recon, normalize_tokens(item))) ++hit;
    }
    recall[name] = static_cast<double>(hit) / static_cast<double>(items.size());
  }
  return recall;
}

}  // namespace ppft
