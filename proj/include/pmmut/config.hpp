// Copyright (c) 2026 pmmut contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "pmmut/corpus.hpp"
#include "pmmut/decode.hpp"
#include "pmmut/model.hpp"

namespace pmmut::config {

// Flat key=value configuration. Section prefixes mirror the modules
// (corpus.*, reduce.*, tokenizer.*, model.*, loss.*, augment.*, train.*,
// decode.*, ablate.*). Unknown keys are rejected everywhere.
struct TrainConfig {
  // corpus generation
  int corpus_n_phones = 12;
  int corpus_feat_dim = 16;
  int corpus_n_words = 40;
  int corpus_word_min_phones = 2;
  int corpus_word_max_phones = 4;
  double corpus_proto_margin = 2.0;
  int corpus_n_train = 360;
  int corpus_n_test = 80;
  int corpus_min_words = 3;
  int corpus_max_words = 7;
  double corpus_noise = 0.4;

  corpus::ReductionSpec reduce;  // evaluation-side reduction

  int tokenizer_vocab = 64;

  model::ModelConfig model;  // v_phone/v_wp/feat_dim synced at wiring time

  // augmentation toggles
  bool aug_phone_mask = true;
  double aug_mask_p = 0.15;
  bool aug_spec_augment = false;
  int aug_time_masks = 2;
  int aug_time_width = 8;
  int aug_feat_masks = 1;
  int aug_feat_width = 4;
  bool aug_speed_perturb = false;

  // optimizer and schedule
  double train_lr = 1e-3;
  int train_warmup = 800;
  double train_adam_beta1 = 0.9;
  double train_adam_beta2 = 0.98;
  double train_adam_eps = 1e-9;
  double train_clip = 5.0;
  int train_batch = 8;
  int train_epochs = 30;
  double train_val_frac = 0.05;

  decode::DecodeConfig dec;

  // ablation grid
  std::string ablate_systems = "baseline,pmt,pm-mmut";
  std::string ablate_alphas = "0.5";
  std::string ablate_n_a2p = "5";
  int ablate_seeds = 5;

  void validate() const;
};

std::vector<std::string> known_keys();

// Throws on unknown key or unparsable value.
void apply_override(TrainConfig& cfg, const std::string& key, const std::string& value);

// key=value lines, '#' comments; applied in file order.
TrainConfig load_config_file(const std::string& path);

// Every known key with its current value, fixed order; used as config echo.
std::string dump_config(const TrainConfig& cfg);

std::vector<std::string> split_list(const std::string& csv);

}  // namespace pmmut::config
