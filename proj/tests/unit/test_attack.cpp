#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ppft/attack.hpp"
#include "ppft/corpus.hpp"
#include "ppft/rng.hpp"
#include "test_util.hpp"

using namespace ppft;

namespace {

// Exactly orthonormal vocabulary: token ti is the i-th basis vector.
TokenVocab orthonormal_vocab(int n_tokens) {
  TokenVocab vocab;
  vocab.d_e = n_tokens;
  vocab.table = Matrix(static_cast<std::size_t>(n_tokens), static_cast<std::size_t>(n_tokens));
  for (int i = 0; i < n_tokens; ++i) {
    vocab.tokens.push_back("t" + std::to_string(i));
    vocab.table.at(static_cast<std::size_t>(i), static_cast<std::size_t>(i)) = 1.0;
    vocab.index_.emplace(vocab.tokens.back(), i);
  }
  return vocab;
}

Corpus corpus_from_id_lists(const std::vector<std::vector<int>>& id_lists,
                            const TokenVocab& vocab) {
  Corpus corpus;
  for (const auto& ids : id_lists) {
    CorpusRecord rec;
    for (int id : ids) {
      if (!rec.prompt.empty()) rec.prompt.push_back(' ');
      rec.prompt += vocab.tokens[static_cast<std::size_t>(id)];
    }
    corpus.records.push_back(std::move(rec));
  }
  return corpus;
}

std::vector<std::vector<int>> random_id_lists(std::size_t records, std::size_t len, int n_tokens,
                                              std::uint64_t seed) {
  std::vector<std::vector<int>> lists(records, std::vector<int>(len));
  CounterRng rng(seed, 0);
  for (auto& ids : lists) {
    for (auto& id : ids) id = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(n_tokens));
  }
  return lists;
}

}  // namespace

TEST_CASE("nearest-neighbor attacker inverts a clean k=1 channel exactly") {
  const TokenVocab vocab = orthonormal_vocab(8);
  const auto id_lists = random_id_lists(10, 12, 8, 41);
  const Corpus corpus = corpus_from_id_lists(id_lists, vocab);

  AttackConfig cfg;
  cfg.attacker = AttackerKind::NearestNeighbor;
  cfg.k = 1;
  cfg.mechanism = Mechanism::None;
  cfg.seed = 5;
  const AttackerModel model = fit_attacker(make_train_pairs(corpus, vocab, cfg), cfg, vocab);

  const NoiseConfig noise{Mechanism::None, 1.0, vocab.d_e, true, 9};
  const AttackReport report = run_attack(model, corpus, {1, true}, noise, vocab);
  REQUIRE(report.rouge_l == 1.0);
  REQUIRE(report.token_accuracy == 1.0);
}

TEST_CASE("fitting twice with the same seed gives the same model") {
  const TokenVocab vocab = orthonormal_vocab(6);
  const Corpus corpus = corpus_from_id_lists(random_id_lists(8, 10, 6, 17), vocab);
  AttackConfig cfg;
  cfg.attacker = AttackerKind::NearestNeighbor;
  cfg.noise_aware = true;
  cfg.k = 2;
  cfg.epsilon = 10.0;
  cfg.trials = 3;
  cfg.seed = 77;
  const auto a = fit_attacker(make_train_pairs(corpus, vocab, cfg), cfg, vocab);
  const auto b = fit_attacker(make_train_pairs(corpus, vocab, cfg), cfg, vocab);
  REQUIRE(a.kgrams == b.kgrams);
  REQUIRE(a.centroids == b.centroids);
}

TEST_CASE("linear decoder reaches full training accuracy on clean unique tokens") {
  // 20-sample instance: every token distinct, least squares has full rank
  const TokenVocab vocab = orthonormal_vocab(20);
  std::vector<std::vector<int>> lists;
  std::vector<int> all_ids(20);
  for (int i = 0; i < 20; ++i) all_ids[static_cast<std::size_t>(i)] = i;
  lists.push_back(all_ids);
  const Corpus corpus = corpus_from_id_lists(lists, vocab);

  AttackConfig cfg;
  cfg.attacker = AttackerKind::LinearDecoder;
  cfg.k = 1;
  cfg.mechanism = Mechanism::None;
  const auto pairs = make_train_pairs(corpus, vocab, cfg);
  const AttackerModel model = fit_attacker(pairs, cfg, vocab);

  std::size_t correct = 0;
  for (const auto& pair : pairs) {
    for (std::size_t j = 0; j < pair.observed_slots.rows(); ++j) {
      const auto& tuple = model.predict_tokens(pair.observed_slots.row(j));
      if (tuple.size() == 1 && tuple[0] == pair.token_ids[j]) ++correct;
    }
  }
  REQUIRE(correct == 20);
}

TEST_CASE("overwhelming noise pushes token accuracy to the chance floor") {
  // E||N|| = d_e/eps = 16/0.05 = 320 >> token separation sqrt(2)
  const int n_tokens = 16;
  const TokenVocab vocab = orthonormal_vocab(n_tokens);
  const Corpus train = corpus_from_id_lists(random_id_lists(40, 32, n_tokens, 3), vocab);
  const Corpus probe = corpus_from_id_lists(random_id_lists(60, 32, n_tokens, 4), vocab);

  AttackConfig cfg;
  cfg.attacker = AttackerKind::NearestNeighbor;
  cfg.k = 1;
  cfg.mechanism = Mechanism::L2Laplace;
  cfg.epsilon = 0.05;
  cfg.seed = 12;
  const AttackerModel model = fit_attacker(make_train_pairs(train, vocab, cfg), cfg, vocab);
  const NoiseConfig noise{Mechanism::L2Laplace, 0.05, vocab.d_e, true, 13};
  const AttackReport report = run_attack(model, probe, {1, true}, noise, vocab);

  const double chance = 1.0 / n_tokens;
  const double se = std::sqrt(chance * (1.0 - chance) / (60.0 * 32.0));
  REQUIRE(report.token_accuracy <= chance + 4.0 * se);

  // shuffled-label baseline: permuting the candidate tuples should not move
  // the score beyond Monte Carlo noise when the channel carries nothing
  AttackerModel shuffled = model;
  std::rotate(shuffled.kgrams.begin(), shuffled.kgrams.begin() + 7, shuffled.kgrams.end());
  const AttackReport base = run_attack(shuffled, probe, {1, true}, noise, vocab);
  REQUIRE(std::abs(report.token_accuracy - base.token_accuracy) <= 4.0 * se);
}

TEST_CASE("attack runs are deterministic") {
  const TokenVocab vocab = orthonormal_vocab(8);
  const Corpus train = corpus_from_id_lists(random_id_lists(12, 16, 8, 21), vocab);
  const Corpus probe = corpus_from_id_lists(random_id_lists(6, 16, 8, 22), vocab);
  AttackConfig cfg;
  cfg.k = 4;
  cfg.epsilon = 20.0;
  cfg.seed = 31;
  const AttackerModel model = fit_attacker(make_train_pairs(train, vocab, cfg), cfg, vocab);
  const NoiseConfig noise{Mechanism::L2Laplace, 20.0, vocab.d_e, true, 33};
  const AttackReport a = run_attack(model, probe, {4, true}, noise, vocab);
  const AttackReport b = run_attack(model, probe, {4, true}, noise, vocab);
  REQUIRE(a.rouge_l == b.rouge_l);
  REQUIRE(a.token_accuracy == b.token_accuracy);
  REQUIRE(a.attribute_recall == b.attribute_recall);
}

TEST_CASE("probe tokens outside the vocabulary are rejected") {
  const TokenVocab vocab = orthonormal_vocab(4);
  Corpus probe;
  probe.records.push_back({"t0 t1 unknownword", "", {}});
  AttackConfig cfg;
  cfg.k = 1;
  cfg.mechanism = Mechanism::None;
  const Corpus train = corpus_from_id_lists(random_id_lists(4, 8, 4, 2), vocab);
  const AttackerModel model = fit_attacker(make_train_pairs(train, vocab, cfg), cfg, vocab);
  const NoiseConfig noise{Mechanism::None, 1.0, vocab.d_e, true, 1};
  REQUIRE_ERROR(run_attack(model, probe, {1, true}, noise, vocab), ErrorCode::UnknownToken);
}

TEST_CASE("fit_attacker validates its inputs") {
  const TokenVocab vocab = orthonormal_vocab(4);
  AttackConfig cfg;
  REQUIRE_ERROR(fit_attacker({}, cfg, vocab), ErrorCode::EmptyInput);

  TrainPair bad;
  bad.observed_slots = Matrix(2, 4);
  bad.token_ids = {0, 1, 2};  // ceil(3/4) = 1 != 2 rows
  cfg.k = 4;
  REQUIRE_ERROR(fit_attacker({bad}, cfg, vocab), ErrorCode::ShapeError);
}

TEST_CASE("sweep produces one report per cell in grid order") {
  const AttributePools pools = default_attribute_pools();
  const Corpus train = make_synthetic_corpus(24, 100, pools);
  const Corpus probe = make_synthetic_corpus(12, 200, pools);
  const TokenVocab vocab = vocab_from_corpora({&train, &probe}, 32, 7);

  SweepGrid grid;
  grid.ks = {2, 4};
  grid.epsilons = {75.0};
  grid.mechanisms = {Mechanism::None, Mechanism::L2Laplace};
  grid.noise_aware = {false};
  HarnessConfig h;
  h.seed = 99;

  const auto reports = sweep(grid, train, probe, vocab, h);
  REQUIRE(reports.size() == 4);
  REQUIRE(reports[0].cell.k == 2);
  REQUIRE(reports[0].cell.mechanism == Mechanism::None);
  REQUIRE(reports[1].cell.mechanism == Mechanism::L2Laplace);
  REQUIRE(reports[2].cell.k == 4);
  for (const auto& r : reports) {
    REQUIRE(r.n_probes == 12);
    REQUIRE(r.rouge_l >= 0.0);
    REQUIRE(r.rouge_l <= 1.0);
    REQUIRE(r.attribute_recall.count("age") == 1);
    REQUIRE(r.attribute_recall.count("sex") == 1);
    REQUIRE(r.attribute_recall.count("symptoms") == 1);
    REQUIRE(r.attribute_recall.count("antecedents") == 1);
  }

  // a singleton grid gives exactly one report
  SweepGrid one;
  one.ks = {4};
  REQUIRE(sweep(one, train, probe, vocab, h).size() == 1);
}

TEST_CASE("noise hurts reconstruction at matched k") {
  const AttributePools pools = default_attribute_pools();
  const Corpus train = make_synthetic_corpus(60, 300, pools);
  const Corpus probe = make_synthetic_corpus(40, 400, pools);
  const TokenVocab vocab = vocab_from_corpora({&train, &probe}, 48, 8);

  SweepGrid grid;
  grid.ks = {4};
  grid.epsilons = {75.0};
  grid.mechanisms = {Mechanism::None, Mechanism::L2Laplace};
  HarnessConfig h;
  h.seed = 4242;
  const auto reports = sweep(grid, train, probe, vocab, h);
  REQUIRE(reports[0].rouge_l >= reports[1].rouge_l);
}
