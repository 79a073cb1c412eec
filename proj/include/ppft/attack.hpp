#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ppft/corpus.hpp"
#include "ppft/error.hpp"
#include "ppft/matrix.hpp"
#include "ppft/metrics.hpp"
#include "ppft/noise.hpp"
#include "ppft/pooling.hpp"
#include "ppft/rng.hpp"
#include "ppft/text.hpp"
#include "ppft/vocab.hpp"

namespace ppft {

// Desk-scale inversion attackers. A pooled slot mixes k tokens, so the
// reconstruction unit is the k-gram: the attacker maps an observed slot
// vector back to one of the token tuples seen in training.
//
// These attackers are deliberately simple (nearest neighbor over candidate
// slot vectors, ridge least-squares to one-hot tuple targets); absolute
// scores are only meaningful relative to each other across (k, eps,
// mechanism) cells, which is what the sweep grids assert.

enum class AttackerKind : std::uint8_t { NearestNeighbor = 0, LinearDecoder = 1 };

inline const char* to_string(AttackerKind k) {
  return k == AttackerKind::NearestNeighbor ? "nn" : "linear";
}

struct AttackConfig {
  AttackerKind attacker = AttackerKind::NearestNeighbor;
  bool noise_aware = false;  // fit on obfuscated slots instead of clean ones
  int k = 4;
  double epsilon = 75.0;
  Mechanism mechanism = Mechanism::L2Laplace;
  bool renormalize = true;
  int trials = 4;  // obfuscation draws per training record when noise_aware
  std::uint64_t seed = 0;
};

struct TrainPair {
  Matrix observed_slots;       // what the attacker sees: m x d_e
  std::vector<int> token_ids;  // the prompt behind it
};

namespace detail {

// Ridge least squares against one-hot class targets, W = (X^T X + lambda I)^-1 X^T Y.
// Y is never materialized: column c of X^T Y is the sum of the x rows labeled c.
inline Matrix ridge_solve_onehot(const Matrix& x, const std::vector<std::size_t>& labels,
                                 std::size_t n_cls, double lambda) {
  const std::size_t d = x.cols();
  Matrix a(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      double s = 0.0;
      for (std::size_t r = 0; r < x.rows(); ++r) s += x.at(r, i) * x.at(r, j);
      a.at(i, j) = s;
      a.at(j, i) = s;
    }
    a.at(i, i) += lambda;
  }
  Matrix b(d, n_cls);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const std::size_t c = labels[r];
    for (std::size_t i = 0; i < d; ++i) b.at(i, c) += x.at(r, i);
  }
  // in-place Cholesky a = L L^T
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a.at(i, j);
      for (std::size_t p = 0; p < j; ++p) s -= a.at(i, p) * a.at(j, p);
      if (i == j) {
        if (s <= 0.0) raise(ErrorCode::ShapeError, "ridge_solve: matrix not positive definite");
        a.at(i, i) = std::sqrt(s);
      } else {
        a.at(i, j) = s / a.at(j, j);
      }
    }
  }
  // forward/back substitution per class column
  Matrix w(d, n_cls);
  std::vector<double> z(d);
  for (std::size_t c = 0; c < n_cls; ++c) {
    for (std::size_t i = 0; i < d; ++i) {
      double s = b.at(i, c);
      for (std::size_t p = 0; p < i; ++p) s -= a.at(i, p) * z[p];
      z[i] = s / a.at(i, i);
    }
    for (std::size_t ii = d; ii-- > 0;) {
      double s = z[ii];
      for (std::size_t p = ii + 1; p < d; ++p) s -= a.at(p, ii) * w.at(p, c);
      w.at(ii, c) = s / a.at(ii, ii);
    }
  }
  return w;
}

}  // namespace detail

class AttackerModel {
 public:
  AttackerKind kind = AttackerKind::NearestNeighbor;
  bool noise_aware = false;
  int k = 1;
  int d_e = 0;
  // candidate token tuples in first-seen order; ties resolve to the lowest index
  std::vector<std::vector<int>> kgrams;
  Matrix centroids;  // NearestNeighbor: |kgrams| x d_e, unit rows (zero rows stay zero)
  Matrix weights;    // LinearDecoder: (d_e + 1) x |kgrams|, last row is the bias

  // Index of the predicted candidate tuple for one observed slot vector.
  std::size_t predict(std::span<const double> slot) const {
    if (slot.size() != static_cast<std::size_t>(d_e)) {
      raise(ErrorCode::ShapeError, "predict: slot width mismatch");
    }
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    if (kind == AttackerKind::NearestNeighbor) {
      for (std::size_t c = 0; c < centroids.rows(); ++c) {
        const double score = dot(centroids.row(c), slot);
        if (score > best_score) {
          best_score = score;
          best = c;
        }
      }
    } else {
      for (std::size_t c = 0; c < weights.cols(); ++c) {
        double score = weights.at(static_cast<std::size_t>(d_e), c);  // bias
        for (std::size_t i = 0; i < slot.size(); ++i) score += weights.at(i, c) * slot[i];
        if (score > best_score) {
          best_score = score;
          best = c;
        }
      }
    }
    return best;
  }

  const std::vector<int>& predict_tokens(std::span<const double> slot) const {
    return kgrams[predict(slot)];
  }
};

// Fit an attacker on (observed slots, token ids) pairs. Observed slots are
// clean pooled vectors for a noise-unaware attacker and obfuscated ones for
// a noise-aware attacker; either way the targets are the token tuples of
// the positional pooling blocks.
inline AttackerModel fit_attacker(const std::vector<TrainPair>& pairs, const AttackConfig& cfg,
                                  const TokenVocab& vocab) {
  if (pairs.empty()) raise(ErrorCode::EmptyInput, "fit_attacker: empty training set");
  if (cfg.k < 1) raise(ErrorCode::ShapeError, "fit_attacker: k must be >= 1");

  AttackerModel model;
  model.kind = cfg.attacker;
  model.noise_aware = cfg.noise_aware;
  model.k = cfg.k;
  model.d_e = vocab.d_e;

  const std::size_t k = static_cast<std::size_t>(cfg.k);
  std::map<std::vector<int>, std::size_t> tuple_index;
  std::vector<std::span<const double>> observations;
  std::vector<std::size_t> labels;

  for (const auto& pair : pairs) {
    const std::size_t n = pair.token_ids.size();
    if (n == 0) raise(ErrorCode::EmptyInput, "fit_attacker: pair with no tokens");
    const std::size_t m = (n + k - 1) / k;
    if (pair.observed_slots.rows() != m ||
        pair.observed_slots.cols() != static_cast<std::size_t>(vocab.d_e)) {
      raise(ErrorCode::ShapeError, "fit_attacker: slots do not match ceil(n/k) x d_e");
    }
    for (std::size_t j = 0; j < m; ++j) {
      const std::size_t begin = j * k;
      const std::size_t end = std::min(begin + k, n);
      std::vector<int> tuple(pair.token_ids.begin() + begin, pair.token_ids.begin() + end);
      for (int id : tuple) {
        if (id < 0 || static_cast<std::size_t>(id) >= vocab.size()) {
          raise(ErrorCode::UnknownToken, "fit_attacker: token id out of range");
        }
      }
      auto [it, inserted] = tuple_index.emplace(std::move(tuple), model.kgrams.size());
      if (inserted) model.kgrams.push_back(it->first);
      observations.push_back(pair.observed_slots.row(j));
      labels.push_back(it->second);
    }
  }

  const std::size_t n_obs = observations.size();
  const std::size_t n_cls = model.kgrams.size();
  const std::size_t d = static_cast<std::size_t>(vocab.d_e);

  if (cfg.attacker == AttackerKind::NearestNeighbor) {
    model.centroids = Matrix(n_cls, d);
    std::vector<std::size_t> counts(n_cls, 0);
    for (std::size_t o = 0; o < n_obs; ++o) {
      auto row = model.centroids.row(labels[o]);
      for (std::size_t i = 0; i < d; ++i) row[i] += observations[o][i];
      ++counts[labels[o]];
    }
    for (std::size_t c = 0; c < n_cls; ++c) {
      auto row = model.centroids.row(c);
      const double inv = 1.0 / static_cast<double>(counts[c]);
      for (double& v : row) v *= inv;
      const double norm = l2_norm(row);
      if (norm > 0.0) {
        for (double& v : row) v /= norm;
      }
    }
  } else {
    Matrix x(n_obs, d + 1);
    for (std::size_t o = 0; o < n_obs; ++o) {
      for (std::size_t i = 0; i < d; ++i) x.at(o, i) = observations[o][i];
      x.at(o, d) = 1.0;
    }
    model.weights = detail::ridge_solve_onehot(x, labels, n_cls, 1e-6);
  }
  return model;
}

struct AttackCell {
  int k = 1;
  double epsilon = 0.0;
  Mechanism mechanism = Mechanism::L2Laplace;
  bool noise_aware = false;
};

struct AttackReport {
  AttackCell cell;
  double rouge_l = 0.0;
  double rouge_l_sem = 0.0;  // standard error of the per-record mean
  double token_accuracy = 0.0;
  std::map<std::string, double> attribute_recall;
  std::size_t n_probes = 0;
  std::uint64_t seed = 0;
};

// Run the full channel per probe record -- embed, pool, obfuscate,
// reconstruct, score -- and average over the corpus. Record r draws its
// noise from the stream derive_seed(noise.seed, r), so a rerun with the
// same configs is bitwise identical.
inline AttackReport run_attack(const AttackerModel& model, const Corpus& probe,
                               const PoolConfig& pool_cfg, const NoiseConfig& noise_cfg,
                               const TokenVocab& vocab) {
  if (probe.records.empty()) raise(ErrorCode::EmptyInput, "run_attack: empty probe corpus");
  if (model.d_e != vocab.d_e) raise(ErrorCode::ShapeError, "run_attack: model/vocab d_e mismatch");
  if (model.k != pool_cfg.k) raise(ErrorCode::ShapeError, "run_attack: model fitted at different k");

  AttackReport report;
  report.cell = {pool_cfg.k, noise_cfg.epsilon, noise_cfg.mechanism, model.noise_aware};
  report.n_probes = probe.records.size();
  report.seed = noise_cfg.seed;

  double rouge_sum = 0.0;
  double rouge_sq_sum = 0.0;
  std::size_t tokens_total = 0;
  std::size_t tokens_correct = 0;
  std::map<std::string, double> recall_sum;
  std::map<std::string, std::size_t> recall_count;

  for (std::size_t r = 0; r < probe.records.size(); ++r) {
    const auto& rec = probe.records[r];
    const std::vector<std::string> ref_tokens = normalize_tokens(rec.prompt);
    const std::vector<int> ids = tokens_to_ids(vocab, ref_tokens);

    const Matrix h = embed(vocab, ids);
    const PooledEmbeddings u = k_pool(h, pool_cfg);
    NoiseConfig per_record = noise_cfg;
    per_record.seed = derive_seed(noise_cfg.seed, r);
    const ObfuscatedEmbeddings obs = obfuscate(u, per_record);

    std::vector<int> predicted_ids;
    for (std::size_t j = 0; j < obs.slots.rows(); ++j) {
      const auto& tuple = model.predict_tokens(obs.slots.row(j));
      predicted_ids.insert(predicted_ids.end(), tuple.begin(), tuple.end());
    }
    std::vector<std::string> hyp_tokens;
    hyp_tokens.reserve(predicted_ids.size());
    for (int id : predicted_ids) hyp_tokens.push_back(vocab.tokens[static_cast<std::size_t>(id)]);

    const double rl = rouge_l(ref_tokens, hyp_tokens);
    rouge_sum += rl;
    rouge_sq_sum += rl * rl;

    tokens_total += ids.size();
    const std::size_t overlap = std::min(ids.size(), predicted_ids.size());
    for (std::size_t i = 0; i < overlap; ++i) {
      if (ids[i] == predicted_ids[i]) ++tokens_correct;
    }

    if (!rec.attributes.empty()) {
      std::string recon_text;
      for (const auto& t : hyp_tokens) {
        if (!recon_text.empty()) recon_text.push_back(' ');
        recon_text += t;
      }
      for (const auto& [name, value] : attribute_recall(rec.attributes, recon_text)) {
        recall_sum[name] += value;
        ++recall_count[name];
      }
    }
  }

  const double n = static_cast<double>(probe.records.size());
  report.rouge_l = rouge_sum / n;
  const double var = std::max(0.0, rouge_sq_sum / n - report.rouge_l * report.rouge_l);
  report.rouge_l_sem = n > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
  report.token_accuracy =
      tokens_total ? static_cast<double>(tokens_correct) / static_cast<double>(tokens_total) : 0.0;
  for (const auto& [name, sum] : recall_sum) {
    report.attribute_recall[name] = sum / static_cast<double>(recall_count[name]);
  }
  return report;
}

// Clean or noise-aware training pairs for one attack cell. Noise-aware
// training sees cfg.trials independent obfuscations per record, each under
// the seed derive_seed(cfg.seed, record, copy + 1).
inline std::vector<TrainPair> make_train_pairs(const Corpus& train, const TokenVocab& vocab,
                                               const AttackConfig& cfg) {
  if (train.records.empty()) raise(ErrorCode::EmptyInput, "make_train_pairs: empty corpus");
  std::vector<TrainPair> pairs;
  const PoolConfig pool_cfg{cfg.k, /*clip_to_unit=*/true};
  for (std::size_t r = 0; r < train.records.size(); ++r) {
    const std::vector<int> ids = tokens_to_ids(vocab, normalize_tokens(train.records[r].prompt));
    const Matrix h = embed(vocab, ids);
    const PooledEmbeddings u = k_pool(h, pool_cfg);
    if (cfg.noise_aware && cfg.mechanism != Mechanism::None) {
      for (int copy = 0; copy < std::max(1, cfg.trials); ++copy) {
        NoiseConfig ncfg{cfg.mechanism, cfg.epsilon, vocab.d_e, cfg.renormalize,
                         derive_seed(cfg.seed, r, static_cast<std::uint64_t>(copy) + 1)};
        pairs.push_back({obfuscate(u, ncfg).slots, ids});
      }
    } else {
      pairs.push_back({u.slots, ids});
    }
  }
  return pairs;
}

inline nlohmann::json to_json(const AttackReport& report) {
  nlohmann::json attrs = nlohmann::json::object();
  for (const auto& [name, value] : report.attribute_recall) attrs[name] = value;
  return nlohmann::json{{"cell",
                         {{"k", report.cell.k},
                          {"epsilon", report.cell.epsilon},
                          {"mechanism", to_string(report.cell.mechanism)},
                          {"noise_aware", report.cell.noise_aware}}},
                        {"rouge_l", report.rouge_l},
                        {"rouge_l_sem", report.rouge_l_sem},
                        {"token_accuracy", report.token_accuracy},
                        {"attribute_recall", attrs},
                        {"n_probes", report.n_probes},
                        {"seed", report.seed}};
}

struct SweepGrid {
  std::vector<int> ks{4};
  std::vector<double> epsilons{75.0};
  std::vector<Mechanism> mechanisms{Mechanism::L2Laplace};
  std::vector<bool> noise_aware{false};
};

struct HarnessConfig {
  AttackerKind attacker = AttackerKind::NearestNeighbor;
  int noisy_copies = 4;
  std::uint64_t seed = 0;
};

// One AttackReport per grid cell, iterated k (outer), then epsilon, then
// mechanism, then noise-awareness. Cell i derives its own seed from
// (cfg.seed, i), so cells are independent and order-insensitive; reports
// come back in grid order.
inline std::vector<AttackReport> sweep(const SweepGrid& grid, const Corpus& train,
                                       const Corpus& probe, const TokenVocab& vocab,
                                       const HarnessConfig& cfg) {
  if (grid.ks.empty() || grid.epsilons.empty() || grid.mechanisms.empty() ||
      grid.noise_aware.empty()) {
    raise(ErrorCode::EmptyInput, "sweep: empty grid axis");
  }
  std::vector<AttackReport> reports;
  std::uint64_t cell = 0;
  for (int k : grid.ks) {
    for (double eps : grid.epsilons) {
      for (Mechanism mech : grid.mechanisms) {
        for (bool aware : grid.noise_aware) {
          const std::uint64_t cell_seed = derive_seed(cfg.seed, cell++);
          AttackConfig acfg;
          acfg.attacker = cfg.attacker;
          acfg.noise_aware = aware;
          acfg.k = k;
          acfg.epsilon = eps;
          acfg.mechanism = mech;
          acfg.trials = cfg.noisy_copies;
          acfg.seed = cell_seed;
          const AttackerModel model = fit_attacker(make_train_pairs(train, vocab, acfg), acfg, vocab);
          const PoolConfig pool_cfg{k, /*clip_to_unit=*/true};
          const NoiseConfig noise_cfg{mech, eps, vocab.d_e, true, derive_seed(cell_seed, 0xace)};
          AttackReport report = run_attack(model, probe, pool_cfg, noise_cfg, vocab);
          report.cell.epsilon = eps;  // echo the grid value even when mechanism is None
          reports.push_back(std::move(report));
        }
      }
    }
  }
  return reports;
}

}  // namespace ppft
