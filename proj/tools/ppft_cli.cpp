// Command-line front door: pool, obfuscate, budget, attack, sweep, serve,
// send. A JSON config file (--config) supplies defaults with the same keys
// as the flags; anything given on the command line wins.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "ppft/ppft.hpp"

namespace {

std::atomic<bool> g_stop{false};

void handle_signal(int) { g_stop = true; }

// CLI11 config reader for flat or per-subcommand JSON objects:
//   {"epsilon": 75.0, "send": {"endpoint": "127.0.0.1:9099"}}
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    nlohmann::json out;
    for (const CLI::Option* opt : app->get_options({})) {
      if (!opt->get_lnames().empty() && opt->get_configurable()) {
        const std::string name = opt->get_lnames()[0];
        if (opt->count() > 0) {
          out[name] = opt->results().size() == 1 ? nlohmann::json(opt->results()[0])
                                                 : nlohmann::json(opt->results());
        } else if (default_also && !opt->get_default_str().empty()) {
          out[name] = opt->get_default_str();
        }
      }
    }
    return out.dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    nlohmann::json j;
    input >> j;
    std::vector<CLI::ConfigItem> items;
    flatten(j, {}, items);
    return items;
  }

 private:
  static void flatten(const nlohmann::json& j, std::vector<std::string> parents,
                      std::vector<CLI::ConfigItem>& items) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (it.value().is_object()) {
        auto deeper = parents;
        deeper.push_back(it.key());
        flatten(it.value(), deeper, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = it.key();
      if (it.value().is_array()) {
        for (const auto& v : it.value()) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(it.value()));
      }
      items.push_back(std::move(item));
    }
  }

  static std::string scalar(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }
};

std::string fmt3(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", ppft::round_half_even(x));
  return buf;
}

// Vocabulary for ad-hoc prompts: the prompt's own normalized tokens.
ppft::TokenVocab prompt_vocab(const std::string& prompt, int d_e, std::uint64_t vocab_seed) {
  ppft::Corpus single;
  single.records.push_back({prompt, "", {}});
  return ppft::vocab_from_corpora({&single}, d_e, vocab_seed);
}

void print_report_text(const ppft::AttackReport& r) {
  std::printf("k=%-3d eps=%-8.4g mech=%-8s aware=%d  rouge_l=%.4f (sem %.4f)  tok_acc=%.4f",
              r.cell.k, r.cell.epsilon, ppft::to_string(r.cell.mechanism),
              r.cell.noise_aware ? 1 : 0, r.rouge_l, r.rouge_l_sem, r.token_accuracy);
  for (const auto& [name, value] : r.attribute_recall) {
    std::printf("  %s=%.3f", name.c_str(), value);
  }
  std::printf("\n");
}

struct HarnessArgs {
  int d_e = 64;
  std::size_t train_records = 320;
  std::size_t probe_records = 200;
  std::uint64_t seed = 1;
  std::string attacker = "nn";
  int noisy_copies = 4;
};

void add_harness_flags(CLI::App* cmd, HarnessArgs& args) {
  cmd->add_option("--d-e", args.d_e, "embedding dimension");
  cmd->add_option("--train", args.train_records, "synthetic training records");
  cmd->add_option("--probes", args.probe_records, "synthetic probe records");
  cmd->add_option("--seed", args.seed, "harness RNG seed");
  cmd->add_option("--attacker", args.attacker, "attacker kind")
      ->check(CLI::IsMember({"nn", "linear"}));
  cmd->add_option("--noisy-copies", args.noisy_copies,
                  "obfuscation draws per record for noise-aware training");
}

std::vector<ppft::AttackReport> run_grid(const ppft::SweepGrid& grid, const HarnessArgs& args) {
  const ppft::AttributePools pools = ppft::default_attribute_pools();
  const ppft::Corpus train =
      ppft::make_synthetic_corpus(args.train_records, ppft::derive_seed(args.seed, 1), pools);
  const ppft::Corpus probe =
      ppft::make_synthetic_corpus(args.probe_records, ppft::derive_seed(args.seed, 2), pools);
  const ppft::TokenVocab vocab =
      ppft::vocab_from_corpora({&train, &probe}, args.d_e, ppft::derive_seed(args.seed, 3));
  ppft::HarnessConfig h;
  h.attacker = args.attacker == "linear" ? ppft::AttackerKind::LinearDecoder
                                         : ppft::AttackerKind::NearestNeighbor;
  h.noisy_copies = args.noisy_copies;
  h.seed = ppft::derive_seed(args.seed, 4);
  return ppft::sweep(grid, train, probe, vocab, h);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"k-pooled, l2-Laplace-obfuscated embedding transmission toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "JSON config file; command-line flags override it");
  app.config_formatter(std::make_shared<JsonConfig>());

  // ---- pool -------------------------------------------------------------
  auto* pool_cmd = app.add_subcommand("pool", "block-mean pool embeddings into slot vectors");
  std::string pool_prompt, pool_in, pool_out;
  int pool_k = 4;
  bool pool_clip = false;
  int pool_d_e = 64;
  std::uint64_t pool_vocab_seed = 42;
  pool_cmd->add_option("--prompt", pool_prompt, "prompt text to embed and pool");
  pool_cmd->add_option("--in", pool_in, "input embedding container (overrides --prompt)");
  pool_cmd->add_option("--k", pool_k, "pooling block size")->check(CLI::PositiveNumber);
  pool_cmd->add_flag("--clip", pool_clip, "rescale each pooled slot to unit norm");
  pool_cmd->add_option("--d-e", pool_d_e, "embedding dimension for --prompt");
  pool_cmd->add_option("--vocab-seed", pool_vocab_seed, "vocab seed for --prompt");
  pool_cmd->add_option("--out", pool_out, "output container file");

  // ---- obfuscate ----------------------------------------------------------
  auto* obf_cmd = app.add_subcommand("obfuscate", "add calibrated noise to pooled slots");
  std::string obf_in, obf_out, obf_mechanism = "laplace";
  double obf_epsilon = 75.0;
  bool obf_no_renorm = false;
  std::uint64_t obf_seed = 0;
  obf_cmd->add_option("--in", obf_in, "input pooled container")->required();
  obf_cmd->add_option("--out", obf_out, "output container file");
  obf_cmd->add_option("--mechanism", obf_mechanism, "noise mechanism")
      ->check(CLI::IsMember({"laplace", "gaussian", "none"}));
  obf_cmd->add_option("--epsilon", obf_epsilon, "privacy parameter");
  obf_cmd->add_flag("--no-renorm", obf_no_renorm, "skip the unit renormalization");
  obf_cmd->add_option("--seed", obf_seed, "noise seed");

  // ---- budget -------------------------------------------------------------
  auto* budget_cmd = app.add_subcommand("budget", "unified privacy-budget calibration table");
  double budget_b = 150.0;
  bool budget_json = false;
  std::vector<std::string> budget_rows;
  budget_cmd->add_option("--B", budget_b, "global privacy budget");
  budget_cmd->add_flag("--json", budget_json, "emit JSON instead of text");
  budget_cmd->add_option("--row", budget_rows, "extra row as name:n:dmax")->delimiter(';');

  // ---- attack ---------------------------------------------------------------
  auto* attack_cmd = app.add_subcommand("attack", "run one inversion-attack cell");
  HarnessArgs attack_args;
  int attack_k = 4;
  double attack_epsilon = 75.0;
  std::string attack_mechanism = "laplace";
  bool attack_aware = false;
  bool attack_json = false;
  add_harness_flags(attack_cmd, attack_args);
  attack_cmd->add_option("--k", attack_k, "pooling size")->check(CLI::PositiveNumber);
  attack_cmd->add_option("--epsilon", attack_epsilon, "privacy parameter");
  attack_cmd->add_option("--mechanism", attack_mechanism, "noise mechanism")
      ->check(CLI::IsMember({"laplace", "gaussian", "none"}));
  attack_cmd->add_flag("--noise-aware", attack_aware, "train the attacker on obfuscated slots");
  attack_cmd->add_flag("--json", attack_json, "emit the report as JSON");

  // ---- sweep ---------------------------------------------------------------
  auto* sweep_cmd = app.add_subcommand("sweep", "grid of attack cells");
  HarnessArgs sweep_args;
  std::vector<int> sweep_ks{4};
  std::vector<double> sweep_eps{75.0};
  std::vector<std::string> sweep_mechs{"laplace"};
  std::vector<bool> sweep_aware{false};
  std::string sweep_json_out;
  add_harness_flags(sweep_cmd, sweep_args);
  sweep_cmd->add_option("--k", sweep_ks, "pooling sizes")->delimiter(',');
  sweep_cmd->add_option("--epsilon", sweep_eps, "privacy parameters")->delimiter(',');
  sweep_cmd->add_option("--mechanism", sweep_mechs, "noise mechanisms")->delimiter(',');
  sweep_cmd->add_option("--noise-aware", sweep_aware, "noise awareness values (0/1)")
      ->delimiter(',');
  sweep_cmd->add_option("--json-out", sweep_json_out, "write the full report list as JSON");

  // ---- serve ---------------------------------------------------------------
  auto* serve_cmd = app.add_subcommand("serve", "receive frames and log text-free records");
  std::string serve_bind = "127.0.0.1:9099";
  std::string serve_log = "ppft_server_log.jsonl";
  serve_cmd->add_option("--bind", serve_bind, "bind address host:port");
  serve_cmd->add_option("--log", serve_log, "JSONL log path");

  // ---- send ----------------------------------------------------------------
  auto* send_cmd = app.add_subcommand("send", "run the client pipeline and transmit one frame");
  std::string send_endpoint = "127.0.0.1:9099";
  std::string send_prompt;
  int send_k = 4;
  double send_epsilon = 75.0;
  std::string send_mechanism = "laplace";
  std::uint64_t send_seed = 0;
  int send_d_e = 64;
  std::uint64_t send_vocab_seed = 42;
  bool send_no_renorm = false;
  int send_retries = 3;
  send_cmd->add_option("--endpoint", send_endpoint, "server endpoint host:port");
  send_cmd->add_option("--prompt", send_prompt, "prompt text")->required();
  send_cmd->add_option("--k", send_k, "pooling size")->check(CLI::PositiveNumber);
  send_cmd->add_option("--epsilon", send_epsilon, "privacy parameter");
  send_cmd->add_option("--mechanism", send_mechanism, "noise mechanism")
      ->check(CLI::IsMember({"laplace", "gaussian", "none"}));
  send_cmd->add_option("--seed", send_seed, "noise seed");
  send_cmd->add_option("--d-e", send_d_e, "embedding dimension");
  send_cmd->add_option("--vocab-seed", send_vocab_seed, "vocab seed");
  send_cmd->add_flag("--no-renorm", send_no_renorm, "skip the unit renormalization");
  send_cmd->add_option("--retries", send_retries, "connection retries");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*pool_cmd) {
      ppft::Matrix h;
      std::uint64_t seed_echo = pool_vocab_seed;
      if (!pool_in.empty()) {
        const ppft::WireFrame frame = ppft::read_frame_file(pool_in);
        h = ppft::payload_matrix(frame);
        seed_echo = frame.seed_echo;
      } else if (!pool_prompt.empty()) {
        const ppft::TokenVocab vocab = prompt_vocab(pool_prompt, pool_d_e, pool_vocab_seed);
        const auto ids = ppft::tokens_to_ids(vocab, ppft::normalize_tokens(pool_prompt));
        h = ppft::embed(vocab, ids);
      } else {
        std::cerr << "pool: need --prompt or --in\n";
        return 1;
      }
      const auto pooled = ppft::k_pool(h, {pool_k, pool_clip});
      const auto ratio = ppft::unpool_info_ratio(static_cast<std::int64_t>(h.rows()), pool_k);
      std::printf("pooled n=%zu tokens into m=%zu slots (k=%d, ratio %lld/%lld)\n", h.rows(),
                  pooled.m(), pool_k, static_cast<long long>(ratio.num),
                  static_cast<long long>(ratio.den));
      if (!pool_out.empty()) {
        ppft::write_frame_file(pool_out, ppft::container_from(pooled.slots,
                                                              static_cast<std::uint16_t>(pool_k),
                                                              seed_echo));
        std::printf("wrote %s\n", pool_out.c_str());
      }
    } else if (*obf_cmd) {
      const ppft::WireFrame in = ppft::read_frame_file(obf_in);
      ppft::PooledEmbeddings u;
      u.slots = ppft::payload_matrix(in);
      u.k = in.k;
      u.source_rows = static_cast<std::size_t>(in.m) * in.k;
      for (std::size_t j = 0; j < u.slots.rows(); ++j) u.blocks.push_back({j * in.k, (j + 1) * in.k});
      ppft::NoiseConfig cfg{ppft::mechanism_from_string(obf_mechanism), obf_epsilon,
                            static_cast<int>(in.d_e), !obf_no_renorm, obf_seed};
      const auto obf = ppft::obfuscate(u, cfg);
      std::printf("obfuscated m=%zu slots (mechanism=%s, epsilon=%g, renormalize=%s)\n", obf.m(),
                  obf_mechanism.c_str(), obf_epsilon, obf_no_renorm ? "off" : "on");
      if (!obf_out.empty()) {
        if (obf_no_renorm && cfg.mechanism != ppft::Mechanism::None) {
          // non-renormalized output is not a wire-legal obfuscated frame;
          // store it as a raw container instead
          ppft::write_frame_file(obf_out,
                                 ppft::container_from(obf.slots, in.k, cfg.seed));
          std::printf("wrote %s as a raw container (no-renorm)\n", obf_out.c_str());
        } else {
          ppft::write_frame_file(obf_out, ppft::frame_from(obf));
          std::printf("wrote %s\n", obf_out.c_str());
        }
      }
    } else if (*budget_cmd) {
      auto rows = ppft::reference_budget_rows();
      for (const auto& spec : budget_rows) {
        const auto c1 = spec.find(':');
        const auto c2 = spec.find(':', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos) {
          std::cerr << "budget: --row expects name:n:dmax\n";
          return 1;
        }
        rows.push_back({spec.substr(0, c1), std::stod(spec.substr(c1 + 1, c2 - c1 - 1)),
                        std::stod(spec.substr(c2 + 1))});
      }
      if (budget_json) {
        std::cout << ppft::budget_table_json(budget_b, rows).dump(2) << "\n";
      } else {
        std::printf("%-10s %10s %8s %10s %8s\n", "Dataset", "n", "D_max", "eps_dchi", "tau");
        for (const auto& row : rows) {
          const auto p = ppft::calibrate({budget_b, row.n, row.d_max});
          std::printf("%-10s %10.2f %8.2f %10s %8s\n", row.dataset.c_str(), row.n, row.d_max,
                      fmt3(p.eps_dchi).c_str(), fmt3(p.tau).c_str());
        }
        std::printf("eps_PR = eps_vector = B/2 = %s (B = %g)\n", fmt3(budget_b / 2.0).c_str(),
                    budget_b);
      }
    } else if (*attack_cmd) {
      ppft::SweepGrid grid;
      grid.ks = {attack_k};
      grid.epsilons = {attack_epsilon};
      grid.mechanisms = {ppft::mechanism_from_string(attack_mechanism)};
      grid.noise_aware = {attack_aware};
      const auto reports = run_grid(grid, attack_args);
      if (attack_json) {
        std::cout << ppft::to_json(reports[0]).dump(2) << "\n";
      } else {
        print_report_text(reports[0]);
      }
    } else if (*sweep_cmd) {
      ppft::SweepGrid grid;
      grid.ks = sweep_ks;
      grid.epsilons = sweep_eps;
      grid.mechanisms.clear();
      for (const auto& m : sweep_mechs) grid.mechanisms.push_back(ppft::mechanism_from_string(m));
      grid.noise_aware.assign(sweep_aware.begin(), sweep_aware.end());
      const auto reports = run_grid(grid, sweep_args);
      for (const auto& r : reports) print_report_text(r);
      if (!sweep_json_out.empty()) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& r : reports) arr.push_back(ppft::to_json(r));
        std::ofstream out(sweep_json_out);
        out << arr.dump(2) << "\n";
        std::printf("wrote %s\n", sweep_json_out.c_str());
      }
    } else if (*serve_cmd) {
      std::signal(SIGINT, handle_signal);
      std::signal(SIGTERM, handle_signal);
      ppft::FrameServer server(serve_bind, serve_log);
      server.start();
      std::printf("listening on %s port %u, logging to %s\n", serve_bind.c_str(), server.port(),
                  serve_log.c_str());
      std::fflush(stdout);
      while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      server.stop();
      std::printf("accepted %llu frames, rejected %llu\n",
                  static_cast<unsigned long long>(server.frames_accepted()),
                  static_cast<unsigned long long>(server.frames_rejected()));
    } else if (*send_cmd) {
      const ppft::TokenVocab vocab = prompt_vocab(send_prompt, send_d_e, send_vocab_seed);
      const auto ids = ppft::tokens_to_ids(vocab, ppft::normalize_tokens(send_prompt));
      const ppft::NoiseConfig noise{ppft::mechanism_from_string(send_mechanism), send_epsilon,
                                    send_d_e, !send_no_renorm, send_seed};
      ppft::SendOptions opts;
      opts.max_retries = send_retries;
      const ppft::Receipt receipt =
          ppft::client_send(ids, vocab, {send_k, true}, noise, send_endpoint, opts);
      std::printf("sent %zu bytes: digest=%08x server=%08x acknowledged=%s%s\n",
                  receipt.frame_bytes, receipt.client_digest, receipt.server_digest,
                  receipt.acknowledged ? "yes" : "no",
                  receipt.unprotected ? " [unprotected: mechanism none]" : "");
      if (receipt.retries_used > 0) {
        std::printf("connected after %d retries\n", receipt.retries_used);
      }
      if (!receipt.acknowledged) {
        std::printf("server error code %u (%s)\n", receipt.server_code,
                    ppft::to_string(static_cast<ppft::ErrorCode>(receipt.server_code)));
        return 1;
      }
    }
  } catch (const ppft::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
