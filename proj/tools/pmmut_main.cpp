// Copyright (c) 2026 pmmut contributors
// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "pmmut/augment.hpp"
#include "pmmut/config.hpp"
#include "pmmut/model.hpp"
#include "pmmut/rng.hpp"
#include "pmmut/trainer.hpp"

namespace fs = std::filesystem;
using namespace pmmut;

namespace {

struct CommonArgs {
  std::string config_path;
  uint64_t seed = 1;
  std::string out;
  int jobs = 1;
};

struct OverrideBag {
  std::vector<std::pair<CLI::Option*, std::string>> options;  // option, key
  std::map<std::string, std::string> values;

  void attach(CLI::App* cmd) {
    for (const auto& key : config::known_keys()) {
      auto [it, fresh] = values.emplace(key, "");
      (void)fresh;
      CLI::Option* opt = cmd->add_option("--" + key, it->second);
      options.emplace_back(opt, key);
    }
  }

  void apply(config::TrainConfig& cfg) const {
    for (const auto& [opt, key] : options) {
      if (opt->count() > 0) config::apply_override(cfg, key, values.at(key));
    }
  }
};

config::TrainConfig resolve_config(const CommonArgs& common, const OverrideBag& bag) {
  config::TrainConfig cfg;
  if (!common.config_path.empty()) cfg = config::load_config_file(common.config_path);
  bag.apply(cfg);
  cfg.validate();
  return cfg;
}

void add_common(CLI::App* cmd, CommonArgs& common, bool with_out) {
  cmd->add_option("--config", common.config_path, "config file (key=value lines)");
  cmd->add_option("--seed", common.seed, "seed controlling all randomness");
  cmd->add_option("--jobs", common.jobs, "parallelism cap");
  if (with_out) cmd->add_option("--out", common.out, "output directory")->required();
}

int run_gen_data(const CommonArgs& common, const OverrideBag& bag) {
  config::TrainConfig cfg = resolve_config(common, bag);
  trainer::generate_dataset(cfg, common.out, common.seed);
  std::printf("wrote dataset to %s (train %d, test %d)\n", common.out.c_str(),
              cfg.corpus_n_train, cfg.corpus_n_test);
  return 0;
}

int run_train_tokenizer(const CommonArgs& common, const OverrideBag& bag,
                        const std::string& data_dir) {
  config::TrainConfig cfg = resolve_config(common, bag);
  corpus::Corpus train = corpus::read_corpus((fs::path(data_dir) / "train").string());
  std::vector<std::string> sentences;
  for (const auto& utt : train.utts) {
    std::string s;
    for (size_t i = 0; i < utt.words.size(); ++i) {
      if (i) s += ' ';
      s += utt.words[i];
    }
    sentences.push_back(std::move(s));
  }
  tok::TokenizerModel tokenizer = tok::train_bpe(sentences, cfg.tokenizer_vocab);
  const std::string out = common.out.empty()
                              ? (fs::path(data_dir) / "tokenizer.txt").string()
                              : common.out;
  tok::save_tokenizer(tokenizer, out);
  std::printf("trained tokenizer (%d tokens) -> %s\n", tokenizer.vocab_size(), out.c_str());
  return 0;
}

int run_train(const CommonArgs& common, const OverrideBag& bag, const std::string& data_dir) {
  config::TrainConfig cfg = resolve_config(common, bag);
  trainer::DataBundle data = trainer::load_dataset(data_dir);
  model::Model best(model::ModelConfig{}, 0);  // replaced by the trained model
  trainer::RunReport report = trainer::train_run(cfg, data, common.seed, common.jobs, &best);
  fs::create_directories(common.out);
  best.save((fs::path(common.out) / "model.pmck").string());
  trainer::write_report(report, common.out);
  std::printf("train done: clean WER %.4f, reduced WER %.4f, report in %s\n",
              report.clean.wer(), report.reduced.wer(), common.out.c_str());
  return 0;
}

const std::vector<corpus::Utterance>& pick_set(const trainer::DataBundle& data,
                                               const std::string& name) {
  if (name == "clean") return data.test_clean;
  if (name == "reduced") return data.test_reduced;
  if (name == "train") return data.train;
  throw Error("unknown evaluation set '" + name + "' (clean, reduced, train)");
}

int run_evaluate(const CommonArgs& common, const OverrideBag& bag, const std::string& data_dir,
                 const std::string& model_path, const std::string& set_name) {
  config::TrainConfig cfg = resolve_config(common, bag);
  trainer::DataBundle data = trainer::load_dataset(data_dir);
  model::Model m = model::Model::load(model_path);
  decode::Metrics metrics =
      trainer::evaluate_model(m, data, pick_set(data, set_name), cfg.dec.lambda, cfg.dec.beam,
                              cfg.dec.max_len_margin, cfg.dec.eos_margin, common.jobs);
  std::printf("%s: WER %.6f (%lld/%lld)  TER %.6f", set_name.c_str(), metrics.wer(),
              metrics.word.dist, metrics.word.ref_len, metrics.ter());
  if (metrics.has_per) std::printf("  PER %.6f", metrics.per());
  std::printf("\n");
  return 0;
}

int run_decode(const CommonArgs& common, const OverrideBag& bag, const std::string& data_dir,
               const std::string& model_path, const std::string& set_name) {
  config::TrainConfig cfg = resolve_config(common, bag);
  trainer::DataBundle data = trainer::load_dataset(data_dir);
  model::Model m = model::Model::load(model_path);
  std::vector<trainer::DecodeRow> rows;
  decode::Metrics metrics =
      trainer::evaluate_model(m, data, pick_set(data, set_name), cfg.dec.lambda, cfg.dec.beam,
                              cfg.dec.max_len_margin, cfg.dec.eos_margin, common.jobs, &rows);
  fs::create_directories(fs::path(common.out));
  const std::string path = (fs::path(common.out) / ("decode_" + set_name + ".tsv")).string();
  trainer::write_decode_rows(rows, path);
  std::printf("decoded %zu utterances -> %s (WER %.6f)\n", rows.size(), path.c_str(),
              metrics.wer());
  return 0;
}

int run_ablate(const CommonArgs& common, const OverrideBag& bag, const std::string& data_dir) {
  config::TrainConfig cfg = resolve_config(common, bag);
  trainer::DataBundle data = trainer::load_dataset(data_dir);
  auto cells = trainer::ablate(cfg, data, common.seed, common.jobs, common.out);
  int failed = 0;
  for (const auto& c : cells) failed += c.failed ? 1 : 0;
  std::printf("ablation done: %zu cells, %d failed, tables in %s\n", cells.size(), failed,
              common.out.c_str());
  return failed == 0 ? 0 : 2;
}

int run_mask_stats(uint64_t seed, double p, long long n) {
  if (p < 0.0 || p > 1.0) throw Error("mask-stats: --p must be in [0,1]");
  if (n < 1) throw Error("mask-stats: --n must be >= 1");
  corpus::PhoneAlignment ali;
  ali.reserve(static_cast<size_t>(n));
  for (long long i = 0; i < n; ++i) {
    const int t = static_cast<int>(2 * i);
    ali.push_back({0, static_cast<int>(i), t, t + 2});
  }
  Rng rng(Rng::derive(seed, 0x3A5C));
  const std::vector<bool> sel = augment::select_phones(ali, p, rng);
  long long hits = 0;
  for (bool b : sel) hits += b ? 1 : 0;
  const double phat = static_cast<double>(hits) / static_cast<double>(n);
  const double half = 2.5758 * std::sqrt(p * (1.0 - p) / static_cast<double>(n));
  const bool inside = phat >= p - half && phat <= p + half;
  std::printf("masked %lld of %lld phones: empirical %.6f, p %.6f, 99%% CI +/- %.6f -> %s\n",
              hits, n, phat, p, half, inside ? "inside" : "OUTSIDE");
  return inside ? 0 : 2;
}

int run_grad_check(uint64_t seed) {
  model::ModelConfig cfg;
  cfg.feat_dim = 4;
  cfg.n_total = 4;
  cfg.n_a2p = 3;
  cfg.d = 16;
  cfg.heads = 2;
  cfg.ffn = 32;
  cfg.kernel = 7;
  cfg.subsample = 4;
  cfg.v_phone = 8;
  cfg.v_wp = 12;
  cfg.dec_layers = 1;
  cfg.dropout = 0.0;
  model::Model m(cfg, seed);
  model::BatchItem item;
  Rng rng(Rng::derive(seed, 0x6D));
  item.feats = Tensor({24, cfg.feat_dim});
  for (size_t i = 0; i < item.feats.numel(); ++i) item.feats[i] = rng.next_gaussian();
  item.inter_targets = {1, 3, 2};
  item.wp_targets = {5, 4};
  item.dec_in = {tok::kSosId, 5, 4};
  item.dec_out = {5, 4, tok::kEosId};
  const double err = m.grad_check_item(item, 1e-5);
  std::printf("grad-check: max relative error %.3e (threshold 1e-4)\n", err);
  return err < 1e-4 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"phone-masked multi-modeling-unit training on a synthetic benchmark"};
  app.require_subcommand(1);

  CommonArgs gen_args, tok_args, train_args, eval_args, dec_args, abl_args;
  OverrideBag gen_bag, tok_bag, train_bag, eval_bag, dec_bag, abl_bag;
  std::string tok_data, train_data, eval_data, dec_data, abl_data;
  std::string eval_model, dec_model;
  std::string eval_set = "clean", dec_set = "clean";
  uint64_t mask_seed = 1, gc_seed = 1;
  double mask_p = 0.15;
  long long mask_n = 100000;

  CLI::App* gen = app.add_subcommand("gen-data", "generate the synthetic corpus and tokenizer");
  add_common(gen, gen_args, /*with_out=*/true);
  gen_bag.attach(gen);

  CLI::App* toksc = app.add_subcommand("train-tokenizer", "train the word-piece model");
  toksc->add_option("--data", tok_data, "dataset directory (reads <data>/train)")->required();
  add_common(toksc, tok_args, /*with_out=*/false);
  toksc->add_option("--out", tok_args.out, "tokenizer output path");
  tok_bag.attach(toksc);

  CLI::App* tr = app.add_subcommand("train", "train a model and report metrics");
  tr->add_option("--data", train_data, "dataset directory")->required();
  add_common(tr, train_args, /*with_out=*/true);
  train_bag.attach(tr);

  CLI::App* ev = app.add_subcommand("evaluate", "decode a test set and print metrics");
  ev->add_option("--data", eval_data, "dataset directory")->required();
  ev->add_option("--model", eval_model, "checkpoint path")->required();
  ev->add_option("--set", eval_set, "clean | reduced | train");
  add_common(ev, eval_args, /*with_out=*/false);
  eval_bag.attach(ev);

  CLI::App* de = app.add_subcommand("decode", "decode a test set and write the hypothesis TSV");
  de->add_option("--data", dec_data, "dataset directory")->required();
  de->add_option("--model", dec_model, "checkpoint path")->required();
  de->add_option("--set", dec_set, "clean | reduced | train");
  add_common(de, dec_args, /*with_out=*/true);
  dec_bag.attach(de);

  CLI::App* ab = app.add_subcommand("ablate", "run the system comparison grid");
  ab->add_option("--data", abl_data, "dataset directory")->required();
  add_common(ab, abl_args, /*with_out=*/true);
  abl_bag.attach(ab);

  CLI::App* ms = app.add_subcommand("mask-stats", "empirical phone-mask selection check");
  ms->add_option("--seed", mask_seed, "seed");
  ms->add_option("--p", mask_p, "mask probability");
  ms->add_option("--n", mask_n, "number of phones");

  CLI::App* gc = app.add_subcommand("grad-check", "finite-difference check of the tiny model");
  gc->add_option("--seed", gc_seed, "seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // 0
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;  // usage error
  }

  try {
    if (gen->parsed()) return run_gen_data(gen_args, gen_bag);
    if (toksc->parsed()) return run_train_tokenizer(tok_args, tok_bag, tok_data);
    if (tr->parsed()) return run_train(train_args, train_bag, train_data);
    if (ev->parsed()) return run_evaluate(eval_args, eval_bag, eval_data, eval_model, eval_set);
    if (de->parsed()) return run_decode(dec_args, dec_bag, dec_data, dec_model, dec_set);
    if (ab->parsed()) return run_ablate(abl_args, abl_bag, abl_data);
    if (ms->parsed()) return run_mask_stats(mask_seed, mask_p, mask_n);
    if (gc->parsed()) return run_grad_check(gc_seed);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
