// End-to-end walkthrough of the client pipeline on one synthetic record:
// embed -> k-pool -> obfuscate -> frame, plus the budget numbers and a
// density-ratio spot check.

#include <cstdio>

#include "ppft/ppft.hpp"

int main() {
  using namespace ppft;

  const CorpusRecord record = synth_clinical_prompt(2024, default_attribute_pools());
  std::printf("prompt:  %s\n", record.prompt.c_str());

  Corpus single;
  single.records.push_back(record);
  const TokenVocab vocab = vocab_from_corpora({&single}, 64, 42);
  const auto ids = tokens_to_ids(vocab, normalize_tokens(record.prompt));
  const Matrix h = embed(vocab, ids);

  const PooledEmbeddings pooled = k_pool(h, {4, true});
  std::printf("pooled:  n=%zu tokens -> m=%zu slots (k=4)\n", h.rows(), pooled.m());

  const NoiseConfig noise{Mechanism::L2Laplace, 75.0, 64, true, 7};
  const ObfuscatedEmbeddings obf = obfuscate(pooled, noise);
  const auto bytes = encode_frame(frame_from(obf));
  std::printf("frame:   %zu bytes, payload digest %08x\n", bytes.size(),
              payload_digest(frame_from(obf)));

  const auto params = calibrate({150.0, static_cast<double>(h.rows()), 2.0});
  std::printf("budget:  B=150 -> eps_dchi=%.3f tau=%.3f eps_vector=%.1f\n", params.eps_dchi,
              params.tau, params.eps_vector);

  const auto scan = metric_dp_scan(2000, 11);
  std::printf("metric-DP spot check: %zu trials, %zu violations\n", scan.trials, scan.violations);
  return scan.violations == 0 ? 0 : 1;
}
