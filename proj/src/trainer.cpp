// Copyright (c) 2026 pmmut contributors
// SPDX-License-Identifier: Apache-2.0

#include "pmmut/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "pmmut/augment.hpp"
#include "pmmut/ctc.hpp"
#include "pmmut/parallel.hpp"
#include "pmmut/rng.hpp"

namespace fs = std::filesystem;

namespace pmmut::trainer {

namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string join_words(const std::vector<std::string>& words) {
  std::string s;
  for (size_t i = 0; i < words.size(); ++i) {
    if (i) s += ' ';
    s += words[i];
  }
  return s;
}

// inverse-square-root schedule with linear warmup
double lr_at(double peak, int warmup, int step) {
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(warmup);
  return peak * std::min(s / w, std::sqrt(w / s));
}

struct AdamState {
  TensorMap m;
  TensorMap v;
  int step = 0;
};

void adam_update(TensorMap& params, const TensorMap& grads, AdamState& state,
                 double lr, double b1, double b2, double eps) {
  ++state.step;
  const double bc1 = 1.0 - std::pow(b1, state.step);
  const double bc2 = 1.0 - std::pow(b2, state.step);
  for (const auto& [name, g] : grads) {
    Tensor& p = params.at(name);
    Tensor& m = state.m.at(name);
    Tensor& v = state.v.at(name);
    for (size_t j = 0; j < p.numel(); ++j) {
      m[j] = b1 * m[j] + (1.0 - b1) * g[j];
      v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
      p[j] -= lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + eps);
    }
  }
}

double grad_global_norm(const TensorMap& grads) {
  double total = 0.0;
  for (const auto& [name, g] : grads) {
    for (size_t j = 0; j < g.numel(); ++j) total += g[j] * g[j];
  }
  return std::sqrt(total);
}

std::vector<int> strip_specials(const std::vector<int>& tokens) {
  std::vector<int> out;
  for (int t : tokens) {
    if (t >= tok::kNumReserved) out.push_back(t);
  }
  return out;
}

}  // namespace

void generate_dataset(const config::TrainConfig& cfg, const std::string& out_dir,
                      uint64_t seed) {
  cfg.validate();
  corpus::Corpus base;
  base.inventory = corpus::make_inventory(cfg.corpus_n_phones, cfg.corpus_feat_dim,
                                          cfg.corpus_proto_margin, seed);
  base.lexicon = corpus::make_lexicon(base.inventory, cfg.corpus_n_words,
                                      cfg.corpus_word_min_phones,
                                      cfg.corpus_word_max_phones, seed);

  corpus::Corpus train = base;
  train.utts = corpus::generate_corpus(base.inventory, base.lexicon, cfg.corpus_n_train,
                                       cfg.corpus_min_words, cfg.corpus_max_words,
                                       cfg.corpus_noise, Rng::derive(seed, 0x7A1));
  corpus::Corpus clean = base;
  clean.utts = corpus::generate_corpus(base.inventory, base.lexicon, cfg.corpus_n_test,
                                       cfg.corpus_min_words, cfg.corpus_max_words,
                                       cfg.corpus_noise, Rng::derive(seed, 0x7E5));
  corpus::Corpus reduced = base;
  for (size_t i = 0; i < clean.utts.size(); ++i) {
    reduced.utts.push_back(corpus::apply_reduction(clean.utts[i], cfg.reduce,
                                                   Rng::derive(seed, 0xD0C + i)));
  }

  corpus::write_corpus(train, (fs::path(out_dir) / "train").string());
  corpus::write_corpus(clean, (fs::path(out_dir) / "test_clean").string());
  corpus::write_corpus(reduced, (fs::path(out_dir) / "test_reduced").string());

  std::vector<std::string> sentences;
  for (const auto& utt : train.utts) sentences.push_back(join_words(utt.words));
  tok::TokenizerModel tokenizer = tok::train_bpe(sentences, cfg.tokenizer_vocab);
  tok::save_tokenizer(tokenizer, (fs::path(out_dir) / "tokenizer.txt").string());
}

DataBundle load_dataset(const std::string& dir) {
  DataBundle data;
  corpus::Corpus train = corpus::read_corpus((fs::path(dir) / "train").string());
  data.inventory = std::move(train.inventory);
  data.lexicon = std::move(train.lexicon);
  data.train = std::move(train.utts);
  data.test_clean = corpus::read_corpus((fs::path(dir) / "test_clean").string()).utts;
  data.test_reduced = corpus::read_corpus((fs::path(dir) / "test_reduced").string()).utts;
  data.tokenizer = tok::load_tokenizer((fs::path(dir) / "tokenizer.txt").string());
  if (data.train.empty()) throw Error("dataset: empty training corpus in " + dir);
  return data;
}

std::vector<int> shifted_phone_targets(const corpus::Lexicon& lex,
                                       const std::vector<std::string>& words) {
  std::vector<int> out;
  for (const auto& w : words) {
    for (int p : lex.phones_of(w)) out.push_back(p + 1);
  }
  return out;
}

model::BatchItem make_item(const corpus::Utterance& utt, const corpus::Lexicon& lex,
                           const tok::TokenizerModel& tokenizer,
                           const model::ModelConfig& mc) {
  model::BatchItem item;
  item.feats = utt.feats;
  const std::string sentence = join_words(utt.words);
  item.wp_targets = tok::encode(tokenizer, sentence, /*strict=*/true);
  item.inter_targets = mc.inter_unit == model::InterUnit::kPhoneme
                           ? shifted_phone_targets(lex, utt.words)
                           : item.wp_targets;
  item.dec_in.push_back(tok::kSosId);
  item.dec_in.insert(item.dec_in.end(), item.wp_targets.begin(), item.wp_targets.end());
  item.dec_out = item.wp_targets;
  item.dec_out.push_back(tok::kEosId);
  return item;
}

decode::Metrics evaluate_model(const model::Model& m, const DataBundle& data,
                               const std::vector<corpus::Utterance>& utts,
                               double lambda, int beam, int max_len_margin,
                               double eos_margin, int jobs,
                               std::vector<DecodeRow>* rows) {
  if (utts.empty()) throw Error("evaluate: empty corpus");
  if (m.config().v_wp != data.tokenizer.vocab_size()) {
    throw Error("evaluate: vocabulary mismatch between checkpoint (" +
                std::to_string(m.config().v_wp) + ") and tokenizer (" +
                std::to_string(data.tokenizer.vocab_size()) + ")");
  }
  const bool phoneme_inter =
      m.config().has_inter_head() && m.config().inter_unit == model::InterUnit::kPhoneme;

  struct PerUtt {
    std::vector<std::string> ref_words, hyp_words;
    std::vector<int> ref_pieces, hyp_pieces;
    std::vector<int> ref_phones, hyp_phones;
    DecodeRow row;
  };
  std::vector<PerUtt> results(utts.size());

  parallel_for(static_cast<int>(utts.size()), jobs, [&](int i) {
    const corpus::Utterance& utt = utts[static_cast<size_t>(i)];
    PerUtt& r = results[static_cast<size_t>(i)];
    const std::string ref_sentence = join_words(utt.words);

    model::ForwardOutput enc = m.encoder_forward(utt.feats, /*train=*/false);
    decode::DecodeConfig dc;
    dc.lambda = lambda;
    dc.beam = beam;
    dc.max_len_margin = max_len_margin;
    dc.eos_margin = eos_margin;
    auto hyps = decode::joint_beam_search(m, enc, dc);
    const decode::Hypothesis& best = hyps.front();

    r.ref_words = utt.words;
    r.ref_pieces = tok::encode(data.tokenizer, ref_sentence, /*strict=*/true);
    r.hyp_pieces = strip_specials(best.tokens);
    const std::string hyp_sentence = tok::decode(data.tokenizer, best.tokens);
    std::istringstream is(hyp_sentence);
    std::string w;
    while (is >> w) r.hyp_words.push_back(w);

    if (phoneme_inter) {
      r.ref_phones = shifted_phone_targets(data.lexicon, utt.words);
      r.hyp_phones = ctc::ctc_greedy_decode(enc.inter_lattice);
    }

    r.row.utt_id = utt.id;
    r.row.reference = ref_sentence;
    r.row.hypothesis = hyp_sentence;
    r.row.word_dist = decode::edit_distance(r.ref_words, r.hyp_words).dist;
    r.row.att_score = best.att_score;
    r.row.ctc_score = best.ctc_score;
  });

  std::vector<std::vector<std::string>> ref_w, hyp_w;
  std::vector<std::vector<int>> ref_p, hyp_p, ref_ph, hyp_ph;
  for (auto& r : results) {
    ref_w.push_back(std::move(r.ref_words));
    hyp_w.push_back(std::move(r.hyp_words));
    ref_p.push_back(std::move(r.ref_pieces));
    hyp_p.push_back(std::move(r.hyp_pieces));
    if (phoneme_inter) {
      ref_ph.push_back(std::move(r.ref_phones));
      hyp_ph.push_back(std::move(r.hyp_phones));
    }
    if (rows) rows->push_back(std::move(r.row));
  }
  decode::Metrics metrics;
  metrics.word = decode::edit_distance_total(ref_w, hyp_w);
  metrics.piece = decode::edit_distance_total(ref_p, hyp_p);
  if (phoneme_inter) {
    metrics.phone = decode::edit_distance_total(ref_ph, hyp_ph);
    metrics.has_per = true;
  }
  return metrics;
}

RunReport train_run(const config::TrainConfig& cfg, const DataBundle& data,
                    uint64_t seed, int jobs, model::Model* best_model) {
  cfg.validate();
  const auto wall_start = std::chrono::steady_clock::now();

  model::ModelConfig mc = cfg.model;
  mc.feat_dim = data.inventory.feat_dim;
  mc.v_phone = data.inventory.size() + 1;
  mc.v_wp = data.tokenizer.vocab_size();
  mc.validate();

  RunReport report;
  report.seed = seed;
  {
    config::TrainConfig echo = cfg;
    echo.model = mc;
    report.config_echo = config::dump_config(echo);
  }

  // fixed validation split
  std::vector<int> order(data.train.size());
  std::iota(order.begin(), order.end(), 0);
  {
    Rng rng(Rng::derive(seed, 0x7A11D));
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i) {
      std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(rng.next_int(0, i))]);
    }
  }
  const int n_val = std::min(static_cast<int>(data.train.size()) - 1,
                             static_cast<int>(std::lround(cfg.train_val_frac * data.train.size())));
  std::vector<int> val_idx(order.begin(), order.begin() + n_val);
  std::vector<int> train_idx(order.begin() + n_val, order.end());
  if (train_idx.empty()) throw Error("train: no training utterances after validation split");

  model::Model m(mc, seed);
  AdamState adam;
  for (const auto& [name, p] : m.params()) {
    adam.m.emplace(name, Tensor(p.shape()));
    adam.v.emplace(name, Tensor(p.shape()));
  }

  // precompute clean items; augmented features are rebuilt per step
  std::vector<model::BatchItem> base_items;
  base_items.reserve(data.train.size());
  for (const auto& utt : data.train) {
    base_items.push_back(make_item(utt, data.lexicon, data.tokenizer, mc));
  }

  double best_val = std::numeric_limits<double>::infinity();
  TensorMap best_params = m.params();
  int global_step = 0;

  for (int epoch = 1; epoch <= cfg.train_epochs; ++epoch) {
    // epoch shuffle
    std::vector<int> idx = train_idx;
    {
      Rng rng(Rng::derive(seed, 0xE90C + static_cast<uint64_t>(epoch)));
      for (int i = static_cast<int>(idx.size()) - 1; i > 0; --i) {
        std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(rng.next_int(0, i))]);
      }
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.has_inter = mc.has_inter_head();
    int steps = 0;

    for (size_t start = 0; start < idx.size(); start += static_cast<size_t>(cfg.train_batch)) {
      const size_t end = std::min(idx.size(), start + static_cast<size_t>(cfg.train_batch));
      std::vector<model::BatchItem> batch;
      batch.reserve(end - start);
      for (size_t k = start; k < end; ++k) {
        const int ui = idx[k];
        const corpus::Utterance& utt = data.train[static_cast<size_t>(ui)];
        Rng aug_rng(Rng::derive(Rng::derive(seed, 0xA06 + static_cast<uint64_t>(epoch)),
                                static_cast<uint64_t>(ui)));
        Tensor feats = utt.feats;
        corpus::PhoneAlignment ali = utt.alignment;
        if (cfg.aug_speed_perturb) {
          constexpr double kFactors[3] = {0.9, 1.0, 1.1};
          const double factor = kFactors[aug_rng.next_int(0, 2)];
          auto [f2, a2] = augment::speed_perturb(feats, ali, factor);
          feats = std::move(f2);
          ali = std::move(a2);
        }
        if (cfg.aug_phone_mask) {
          feats = augment::phone_mask(feats, ali, augment::MaskPolicy{cfg.aug_mask_p}, aug_rng);
        }
        if (cfg.aug_spec_augment) {
          feats = augment::spec_augment(feats, cfg.aug_time_masks,
                                        std::min(cfg.aug_time_width, feats.dim(0)),
                                        cfg.aug_feat_masks,
                                        std::min(cfg.aug_feat_width, feats.dim(1)), aug_rng);
        }
        model::BatchItem item = base_items[static_cast<size_t>(ui)];
        item.feats = std::move(feats);
        batch.push_back(std::move(item));
      }

      ++global_step;
      model::LossResult loss =
          m.compute_loss(batch, Rng::derive(seed, 0x57E9 + static_cast<uint64_t>(global_step)), jobs);
      stats.dropped += loss.dropped;
      if (loss.contributed == 0) {
        std::fprintf(stderr, "[train] step %d: entire batch infeasible, skipped\n", global_step);
        continue;
      }
      if (!std::isfinite(loss.components.total)) {
        throw Error("train: diverged (non-finite loss) at step " + std::to_string(global_step));
      }
      const double recombined =
          mc.beta * (loss.components.wp_ctc + mc.alpha * loss.components.inter_ctc) +
          (1.0 - mc.beta) * loss.components.ce;
      report.max_decomposition_error = std::max(
          report.max_decomposition_error, std::abs(recombined - loss.components.total));

      const double gnorm = grad_global_norm(loss.grads);
      if (!std::isfinite(gnorm)) {
        throw Error("train: diverged (non-finite gradient norm) at step " +
                    std::to_string(global_step));
      }
      stats.max_grad_norm = std::max(stats.max_grad_norm, gnorm);
      if (cfg.train_clip > 0.0 && gnorm > cfg.train_clip) {
        const double s = cfg.train_clip / gnorm;
        for (auto& [name, g] : loss.grads) {
          for (size_t j = 0; j < g.numel(); ++j) g[j] *= s;
        }
      }
      adam_update(m.params(), loss.grads, adam,
                  lr_at(cfg.train_lr, cfg.train_warmup, adam.step + 1),
                  cfg.train_adam_beta1, cfg.train_adam_beta2, cfg.train_adam_eps);

      stats.inter_ctc += loss.components.inter_ctc;
      stats.wp_ctc += loss.components.wp_ctc;
      stats.ce += loss.components.ce;
      stats.total += loss.components.total;
      ++steps;
    }
    if (steps > 0) {
      stats.inter_ctc /= steps;
      stats.wp_ctc /= steps;
      stats.ce /= steps;
      stats.total /= steps;
    }

    // validation TER via greedy attention rollout
    if (!val_idx.empty()) {
      std::vector<std::vector<int>> refs(val_idx.size()), hyps(val_idx.size());
      parallel_for(static_cast<int>(val_idx.size()), jobs, [&](int k) {
        const corpus::Utterance& utt = data.train[static_cast<size_t>(val_idx[static_cast<size_t>(k)])];
        model::ForwardOutput enc = m.encoder_forward(utt.feats, /*train=*/false);
        hyps[static_cast<size_t>(k)] =
            strip_specials(decode::greedy_attention_rollout(m, enc, cfg.dec.max_len_margin));
        refs[static_cast<size_t>(k)] =
            tok::encode(data.tokenizer, join_words(utt.words), /*strict=*/true);
      });
      stats.val_ter = decode::edit_distance_total(refs, hyps).rate();
    }

    if (val_idx.empty() || stats.val_ter < best_val) {
      best_val = val_idx.empty() ? 0.0 : stats.val_ter;
      best_params = m.params();
      report.best_epoch = epoch;
    }
    report.dropped_total += stats.dropped;
    report.epochs.push_back(stats);
    std::fprintf(stderr,
                 "[train] seed %llu epoch %d total %.4f wp %.4f inter %.4f ce %.4f val_ter %.4f\n",
                 static_cast<unsigned long long>(seed), epoch, stats.total, stats.wp_ctc,
                 stats.inter_ctc, stats.ce, stats.val_ter);
  }

  model::Model best(mc, std::move(best_params));
  report.clean = evaluate_model(best, data, data.test_clean, cfg.dec.lambda, cfg.dec.beam,
                                cfg.dec.max_len_margin, cfg.dec.eos_margin, jobs);
  report.reduced = evaluate_model(best, data, data.test_reduced, cfg.dec.lambda, cfg.dec.beam,
                                  cfg.dec.max_len_margin, cfg.dec.eos_margin, jobs);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  if (best_model) *best_model = std::move(best);
  return report;
}

namespace {

std::string metrics_tsv(const char* set_name, const decode::Metrics& m) {
  std::ostringstream os;
  os << "final\t" << set_name << "\twer\t" << fmt_double(m.wer()) << "\t" << m.word.dist
     << "\t" << m.word.subs << "\t" << m.word.ins << "\t" << m.word.dels << "\t"
     << m.word.ref_len << "\n";
  os << "final\t" << set_name << "\tter\t" << fmt_double(m.ter()) << "\t" << m.piece.dist
     << "\t" << m.piece.subs << "\t" << m.piece.ins << "\t" << m.piece.dels << "\t"
     << m.piece.ref_len << "\n";
  if (m.has_per) {
    os << "final\t" << set_name << "\tper\t" << fmt_double(m.per()) << "\t" << m.phone.dist
       << "\t" << m.phone.subs << "\t" << m.phone.ins << "\t" << m.phone.dels << "\t"
       << m.phone.ref_len << "\n";
  }
  return os.str();
}

}  // namespace

void write_report(const RunReport& report, const std::string& out_dir) {
  fs::create_directories(out_dir);
  {
    // machine-readable, deterministic (no wall time)
    std::ofstream f(fs::path(out_dir) / "report.tsv", std::ios::binary);
    if (!f) throw Error("cannot write report.tsv");
    f << "seed\t" << report.seed << "\n";
    f << "best_epoch\t" << report.best_epoch << "\n";
    f << "max_decomposition_error\t" << fmt_double(report.max_decomposition_error) << "\n";
    f << "dropped\t" << report.dropped_total << "\n";
    for (const auto& e : report.epochs) {
      f << "epoch\t" << e.epoch << "\t" << (e.has_inter ? fmt_double(e.inter_ctc) : "-")
        << "\t" << fmt_double(e.wp_ctc) << "\t" << fmt_double(e.ce) << "\t"
        << fmt_double(e.total) << "\t" << fmt_double(e.val_ter) << "\t"
        << fmt_double(e.max_grad_norm) << "\n";
    }
    f << metrics_tsv("clean", report.clean);
    f << metrics_tsv("reduced", report.reduced);
  }
  {
    std::ofstream f(fs::path(out_dir) / "report.txt", std::ios::binary);
    if (!f) throw Error("cannot write report.txt");
    f << "run report (seed " << report.seed << ")\n";
    f << "wall time: " << std::lround(report.wall_seconds) << " s\n";
    f << "best validation epoch: " << report.best_epoch << "\n";
    f << "loss decomposition max error: " << report.max_decomposition_error << "\n";
    f << "dropped utterances: " << report.dropped_total << "\n\n";
    f << "epoch  inter_ctc  wp_ctc     ce         total      val_ter  max|g|\n";
    char line[160];
    for (const auto& e : report.epochs) {
      if (e.has_inter) {
        std::snprintf(line, sizeof(line), "%5d  %9.4f  %9.4f  %9.4f  %9.4f  %7.4f  %6.2f\n",
                      e.epoch, e.inter_ctc, e.wp_ctc, e.ce, e.total, e.val_ter, e.max_grad_norm);
      } else {
        std::snprintf(line, sizeof(line), "%5d          -  %9.4f  %9.4f  %9.4f  %7.4f  %6.2f\n",
                      e.epoch, e.wp_ctc, e.ce, e.total, e.val_ter, e.max_grad_norm);
      }
      f << line;
    }
    auto metrics_line = [&](const char* name, const decode::Metrics& m) {
      std::ostringstream os;
      os << name << ": WER " << m.wer() << " (" << m.word.dist << "/" << m.word.ref_len
         << "), TER " << m.ter();
      if (m.has_per) os << ", PER " << m.per();
      os << "\n";
      return os.str();
    };
    f << "\n" << metrics_line("clean  ", report.clean);
    f << metrics_line("reduced", report.reduced);
    f << "\nschedule note: Adam + inverse-sqrt warmup is a desk-scale stand-in; the\n"
         "reference systems trained with their toolkit defaults.\n";
    f << "\nconfig echo:\n" << report.config_echo;
  }
}

void write_decode_rows(const std::vector<DecodeRow>& rows, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write decode output: " + path);
  for (const auto& r : rows) {
    f << r.utt_id << "\t" << r.reference << "\t" << r.hypothesis << "\t" << r.word_dist
      << "\t" << fmt_double(r.att_score) << "\t" << fmt_double(r.ctc_score) << "\n";
  }
}

config::TrainConfig system_config(const config::TrainConfig& base, const std::string& system,
                                  double alpha, int n_a2p) {
  config::TrainConfig cfg = base;
  cfg.model.inter_unit = model::InterUnit::kPhoneme;
  if (system == "baseline") {
    cfg.aug_phone_mask = false;
    cfg.model.alpha = 0.0;
    cfg.model.n_a2p = cfg.model.n_total;
  } else if (system == "pmt") {
    cfg.aug_phone_mask = true;
    cfg.model.alpha = 0.0;
    cfg.model.n_a2p = cfg.model.n_total;
  } else if (system == "mmut") {
    cfg.aug_phone_mask = false;
    cfg.model.alpha = alpha;
    cfg.model.n_a2p = n_a2p;
  } else if (system == "pm-mmut") {
    cfg.aug_phone_mask = true;
    cfg.model.alpha = alpha;
    cfg.model.n_a2p = n_a2p;
  } else if (system == "pm-mmut-wp") {
    cfg.aug_phone_mask = true;
    cfg.model.alpha = alpha;
    cfg.model.n_a2p = n_a2p;
    cfg.model.inter_unit = model::InterUnit::kWordPiece;
  } else if (system == "inter-ctc") {
    // intermediate CTC baseline: same unit as the final head, midpoint tap
    cfg.aug_phone_mask = true;
    cfg.model.alpha = alpha;
    cfg.model.n_a2p = std::max(1, cfg.model.n_total / 2);
    cfg.model.inter_unit = model::InterUnit::kWordPiece;
  } else {
    throw Error("ablate: unknown system '" + system + "'");
  }
  return cfg;
}

std::vector<AblateCell> ablate(const config::TrainConfig& cfg, const DataBundle& data,
                               uint64_t seed, int jobs, const std::string& out_dir) {
  cfg.validate();
  const auto systems = config::split_list(cfg.ablate_systems);
  const auto alphas = config::split_list(cfg.ablate_alphas);
  const auto taps = config::split_list(cfg.ablate_n_a2p);
  if (systems.empty()) throw Error("ablate: no systems requested");

  std::vector<AblateCell> cells;
  std::vector<std::string> seen;
  for (const auto& system : systems) {
    for (const auto& alpha_s : alphas) {
      for (const auto& tap_s : taps) {
        const double alpha = std::stod(alpha_s);
        const int tap = std::stoi(tap_s);
        std::string key;
        std::string resolve_error;
        double cell_alpha = alpha;
        int cell_tap = tap;
        try {
          const config::TrainConfig cell_cfg = system_config(cfg, system, alpha, tap);
          cell_alpha = cell_cfg.model.alpha;
          cell_tap = cell_cfg.model.n_a2p;
          // baseline/pmt ignore alpha and the tap; dedupe identical cells
          key = system + "|" + config::dump_config(cell_cfg);
        } catch (const std::exception& e) {
          resolve_error = e.what();
          key = system + "|unresolvable";
        }
        if (std::find(seen.begin(), seen.end(), key) != seen.end()) continue;
        seen.push_back(key);
        for (int s = 0; s < cfg.ablate_seeds; ++s) {
          AblateCell cell;
          cell.system = system;
          cell.alpha = cell_alpha;
          cell.n_a2p = cell_tap;
          cell.seed = Rng::derive(seed, 0xAB1A7E + static_cast<uint64_t>(s));
          if (!resolve_error.empty()) {
            cell.failed = true;
            cell.error = resolve_error;
          }
          cells.push_back(std::move(cell));
        }
      }
    }
  }

  for (auto& cell : cells) {
    if (cell.failed) continue;
    try {
      config::TrainConfig cell_cfg = system_config(cfg, cell.system, cell.alpha, cell.n_a2p);
      cell.report = train_run(cell_cfg, data, cell.seed, jobs, nullptr);
    } catch (const std::exception& e) {
      cell.failed = true;
      cell.error = e.what();
      std::fprintf(stderr, "[ablate] cell %s seed %llu failed: %s\n", cell.system.c_str(),
                   static_cast<unsigned long long>(cell.seed), e.what());
    }
  }

  fs::create_directories(out_dir);
  {
    std::ofstream f(fs::path(out_dir) / "ablation.tsv", std::ios::binary);
    if (!f) throw Error("cannot write ablation.tsv");
    f << "system\talpha\tn_a2p\tseed\tstatus\tclean_wer\treduced_wer\tclean_ter\t"
         "reduced_ter\n";
    for (const auto& c : cells) {
      f << c.system << "\t" << fmt_double(c.alpha) << "\t" << c.n_a2p << "\t" << c.seed
        << "\t" << (c.failed ? "failed" : "ok") << "\t";
      if (c.failed) {
        f << "-\t-\t-\t-\n";
      } else {
        f << fmt_double(c.report.clean.wer()) << "\t" << fmt_double(c.report.reduced.wer())
          << "\t" << fmt_double(c.report.clean.ter()) << "\t"
          << fmt_double(c.report.reduced.ter()) << "\n";
      }
    }
  }
  {
    std::ofstream f(fs::path(out_dir) / "ablation.txt", std::ios::binary);
    if (!f) throw Error("cannot write ablation.txt");
    f << "ablation grid over systems {" << cfg.ablate_systems << "}\n\n";
    char line[200];
    f << "system        alpha  n_a2p        seed   clean WER  reduced WER\n";
    for (const auto& c : cells) {
      if (c.failed) {
        std::snprintf(line, sizeof(line), "%-12s %6.2f  %5d  %10llu   FAILED: %s\n",
                      c.system.c_str(), c.alpha, c.n_a2p,
                      static_cast<unsigned long long>(c.seed), c.error.c_str());
      } else {
        std::snprintf(line, sizeof(line), "%-12s %6.2f  %5d  %10llu   %9.4f  %11.4f\n",
                      c.system.c_str(), c.alpha, c.n_a2p,
                      static_cast<unsigned long long>(c.seed), c.report.clean.wer(),
                      c.report.reduced.wer());
      }
      f << line;
    }
    // pairwise win counts on the reduced set, aligned by seed order
    f << "\npairwise win counts (reduced-set WER, lower wins):\n";
    std::vector<std::string> names;
    for (const auto& c : cells) {
      if (std::find(names.begin(), names.end(), c.system) == names.end()) names.push_back(c.system);
    }
    auto wers_of = [&](const std::string& name) {
      std::vector<double> w;
      for (const auto& c : cells) {
        if (c.system == name && !c.failed) w.push_back(c.report.reduced.wer());
      }
      return w;
    };
    for (size_t a = 0; a < names.size(); ++a) {
      for (size_t b = a + 1; b < names.size(); ++b) {
        const auto wa = wers_of(names[a]);
        const auto wb = wers_of(names[b]);
        const size_t n = std::min(wa.size(), wb.size());
        int wins_a = 0, wins_b = 0;
        for (size_t i = 0; i < n; ++i) {
          if (wa[i] < wb[i]) ++wins_a;
          else if (wb[i] < wa[i]) ++wins_b;
        }
        std::snprintf(line, sizeof(line), "  %-12s vs %-12s : %d-%d over %zu seeds\n",
                      names[a].c_str(), names[b].c_str(), wins_a, wins_b, n);
        f << line;
      }
    }
  }
  return cells;
}

}  // namespace pmmut::trainer
