// Copyright (c) 2026 pmmut contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pmmut/config.hpp"
#include "pmmut/corpus.hpp"
#include "pmmut/decode.hpp"
#include "pmmut/model.hpp"
#include "pmmut/tokenizer.hpp"

namespace pmmut::trainer {

// Everything a run reads from disk.
struct DataBundle {
  corpus::PhoneInventory inventory;
  corpus::Lexicon lexicon;
  std::vector<corpus::Utterance> train;
  std::vector<corpus::Utterance> test_clean;
  std::vector<corpus::Utterance> test_reduced;
  tok::TokenizerModel tokenizer;
};

// Generates train/test_clean/test_reduced under out_dir and the tokenizer
// file; byte-identical for a fixed seed and config.
void generate_dataset(const config::TrainConfig& cfg, const std::string& out_dir,
                      uint64_t seed);

DataBundle load_dataset(const std::string& dir);

// CTC phone targets are inventory ids shifted by one so blank keeps id 0.
std::vector<int> shifted_phone_targets(const corpus::Lexicon& lex,
                                       const std::vector<std::string>& words);

model::BatchItem make_item(const corpus::Utterance& utt, const corpus::Lexicon& lex,
                           const tok::TokenizerModel& tokenizer,
                           const model::ModelConfig& mc);

struct EpochStats {
  int epoch = 0;
  double inter_ctc = 0.0;  // absent when the run has no intermediate head
  double wp_ctc = 0.0;
  double ce = 0.0;
  double total = 0.0;
  double max_grad_norm = 0.0;
  double val_ter = 0.0;
  int dropped = 0;
  bool has_inter = false;
};

struct RunReport {
  std::vector<EpochStats> epochs;
  decode::Metrics clean;
  decode::Metrics reduced;
  uint64_t seed = 0;
  double wall_seconds = 0.0;
  std::string config_echo;
  // max over steps of |beta*(wp + alpha*inter) + (1-beta)*ce - total|
  double max_decomposition_error = 0.0;
  int dropped_total = 0;
  int best_epoch = 0;
};

struct DecodeRow {
  std::string utt_id;
  std::string reference;
  std::string hypothesis;
  long long word_dist = 0;
  double att_score = 0.0;
  double ctc_score = 0.0;
};

// Adam with inverse-square-root warmup; per-step augmentation order is
// speed_perturb -> phone_mask -> spec_augment; keeps the parameters of the
// best-validation-TER epoch. Aborts with a diagnostic on non-finite loss or
// gradients.
RunReport train_run(const config::TrainConfig& cfg, const DataBundle& data,
                    uint64_t seed, int jobs, model::Model* best_model);

decode::Metrics evaluate_model(const model::Model& m, const DataBundle& data,
                               const std::vector<corpus::Utterance>& utts,
                               double lambda, int beam, int max_len_margin,
                               double eos_margin, int jobs,
                               std::vector<DecodeRow>* rows = nullptr);

void write_report(const RunReport& report, const std::string& out_dir);
void write_decode_rows(const std::vector<DecodeRow>& rows, const std::string& path);

// --- ablation harness ---------------------------------------------------

struct AblateCell {
  std::string system;
  double alpha = 0.0;
  int n_a2p = 0;
  uint64_t seed = 0;
  bool failed = false;
  std::string error;
  RunReport report;
};

// Maps a system name (baseline, pmt, mmut, pm-mmut, pm-mmut-wp, inter-ctc)
// onto config toggles. Throws on unknown systems.
config::TrainConfig system_config(const config::TrainConfig& base, const std::string& system,
                                  double alpha, int n_a2p);

// One train+evaluate per grid cell; failures are recorded per cell and the
// grid continues. Writes ablation.tsv and ablation.txt under out_dir.
std::vector<AblateCell> ablate(const config::TrainConfig& cfg, const DataBundle& data,
                               uint64_t seed, int jobs, const std::string& out_dir);

}  // namespace pmmut::trainer
