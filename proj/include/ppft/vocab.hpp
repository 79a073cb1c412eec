#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ppft/error.hpp"
#include "ppft/matrix.hpp"
#include "ppft/rng.hpp"

namespace ppft {

// Deterministic synthetic embedding table. Each token's vector comes from a
// counter RNG stream keyed by (seed, fnv1a64(token)) and is l2-normalized,
// so the table is a pure function of (tokens, d_e, seed) and pairwise token
// distances are bounded by 2.
struct TokenVocab {
  std::vector<std::string> tokens;
  int d_e = 0;
  std::uint64_t seed = 0;
  Matrix table;  // |tokens| x d_e, unit-norm rows

  int id_of(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? -1 : it->second;
  }

  std::size_t size() const { return tokens.size(); }

  // populated by build_vocab
  std::unordered_map<std::string, int> index_;
};

inline TokenVocab build_vocab(std::vector<std::string> tokens, int d_e, std::uint64_t seed) {
  if (tokens.empty()) raise(ErrorCode::EmptyInput, "build_vocab: no tokens");
  if (d_e < 2) raise(ErrorCode::BadDimension, "build_vocab: d_e must be >= 2");
  std::unordered_set<std::string> seen;
  for (const auto& t : tokens) {
    if (!seen.insert(t).second) raise(ErrorCode::DuplicateToken, "build_vocab: '" + t + "'");
  }

  TokenVocab vocab;
  vocab.tokens = std::move(tokens);
  vocab.d_e = d_e;
  vocab.seed = seed;
  vocab.table = Matrix(vocab.tokens.size(), static_cast<std::size_t>(d_e));
  for (std::size_t i = 0; i < vocab.tokens.size(); ++i) {
    CounterRng rng(seed, fnv1a64(vocab.tokens[i]));
    rng.fill_sphere(vocab.table.row(i));
    vocab.index_.emplace(vocab.tokens[i], static_cast<int>(i));
  }
  return vocab;
}

// Row i of the result is the vocab vector of token_ids[i].
inline Matrix embed(const TokenVocab& vocab, std::span<const int> token_ids) {
  if (token_ids.empty()) raise(ErrorCode::EmptyInput, "embed: no token ids");
  Matrix H(token_ids.size(), static_cast<std::size_t>(vocab.d_e));
  for (std::size_t i = 0; i < token_ids.size(); ++i) {
    const int id = token_ids[i];
    if (id < 0 || static_cast<std::size_t>(id) >= vocab.size()) {
      raise(ErrorCode::UnknownToken, "embed: id " + std::to_string(id) + " out of range");
    }
    auto src = vocab.table.row(static_cast<std::size_t>(id));
    auto dst = H.row(i);
    for (std::size_t j = 0; j < src.size(); ++j) dst[j] = src[j];
  }
  return H;
}

inline std::vector<int> tokens_to_ids(const TokenVocab& vocab,
                                      const std::vector<std::string>& toks) {
  std::vector<int> ids;
  ids.reserve(toks.size());
  for (const auto& t : toks) {
    const int id = vocab.id_of(t);
    if (id < 0) raise(ErrorCode::UnknownToken, "tokens_to_ids: '" + t + "'");
    ids.push_back(id);
  }
  return ids;
}

}  // namespace ppft
