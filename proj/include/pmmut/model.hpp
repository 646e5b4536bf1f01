// Copyright (c) 2026 pmmut contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pmmut/graph.hpp"

namespace pmmut::model {

// Unit of the intermediate CTC head: phoneme gives PM-MMUT / MMUT, word-piece
// gives PM-MMUT-WP and the intermediate-CTC baseline.
enum class InterUnit { kPhoneme, kWordPiece };

std::string inter_unit_name(InterUnit u);
InterUnit inter_unit_from_name(const std::string& s);

struct ModelConfig {
  int feat_dim = 16;
  int n_total = 6;   // encoder blocks
  int n_a2p = 5;     // blocks below the intermediate head
  int d = 64;
  int heads = 4;
  int ffn = 128;
  int kernel = 7;    // depthwise conv width
  int subsample = 4;
  int v_phone = 13;  // phone inventory + blank
  int v_wp = 64;
  int dec_layers = 2;
  double dropout = 0.1;
  double label_smoothing = 0.1;
  double alpha = 0.5;  // intermediate CTC weight
  double beta = 0.3;   // CTC vs CE trade-off
  InterUnit inter_unit = InterUnit::kPhoneme;

  void validate() const;
  int inter_vocab() const {
    return inter_unit == InterUnit::kPhoneme ? v_phone : v_wp;
  }
  bool has_inter_head() const { return alpha > 0.0; }

  std::string serialize() const;  // key=value block for checkpoints
  static ModelConfig deserialize(const std::string& text);
};

struct ForwardOutput {
  Tensor h_plr;          // T' x d
  Tensor h_wplr;         // T' x d
  Tensor inter_lattice;  // T' x inter_vocab log-probs
  Tensor wp_lattice;     // T' x v_wp log-probs
  int h_plr_node = -1;   // graph node ids; equal when the stacks share
  int h_wplr_node = -1;
  bool shared = false;
};

struct LossComponents {
  double inter_ctc = 0.0;
  double wp_ctc = 0.0;
  double ce = 0.0;
  double total = 0.0;
  bool has_inter = false;
};

// One utterance, features already augmented, targets already tokenized.
struct BatchItem {
  Tensor feats;                    // T x F
  std::vector<int> inter_targets;  // intermediate CTC targets
  std::vector<int> wp_targets;     // word-piece CTC targets
  std::vector<int> dec_in;         // sos + pieces
  std::vector<int> dec_out;        // pieces + eos
};

struct LossResult {
  LossComponents components;  // batch means
  TensorMap grads;            // mean over contributing utterances
  int dropped = 0;            // CTC-infeasible utterances skipped
  int contributed = 0;
};

class Model {
 public:
  Model(ModelConfig cfg, uint64_t seed);
  Model(ModelConfig cfg, TensorMap params);

  const ModelConfig& config() const { return cfg_; }
  const TensorMap& params() const { return params_; }
  TensorMap& params() { return params_; }

  // Runs the subsampler, both encoder stacks, and both CTC heads. Training
  // mode draws dropout masks from step_seed; eval mode is deterministic.
  ForwardOutput encoder_forward(const Tensor& feats, bool train, uint64_t step_seed = 0) const;

  // Per-step log-distributions over v_wp for a sos-prefixed token sequence,
  // eval mode. Step i conditions only on tokens before i.
  Tensor decoder_forward(const Tensor& h_wplr, const std::vector<int>& prefix) const;

  // Total loss beta*(wp_ctc + alpha*inter_ctc) + (1-beta)*ce and parameter
  // gradients, averaged over the batch. Infeasible utterances are dropped
  // and counted, never silently zeroed.
  LossResult compute_loss(const std::vector<BatchItem>& batch, uint64_t step_seed,
                          int jobs = 1) const;

  // Finite-difference check of the full per-utterance training graph;
  // returns the max relative error over all parameter entries.
  double grad_check_item(const BatchItem& item, double step, uint64_t step_seed = 0,
                         bool train = false) const;

  // Checkpoint: magic "PMCK", embedded config, named tensors, checksum.
  void save(const std::string& path) const;
  static Model load(const std::string& path, const ModelConfig* expected = nullptr);

  // Shortest input length (frames) that survives subsampling and keeps a
  // CTC target of the given augmented length feasible.
  int min_frames_for(int target_len_with_repeats) const;

 private:
  ModelConfig cfg_;
  TensorMap params_;
};

// Absolute sinusoidal positions, added after subsampling.
Tensor positional_encoding(int length, int d);

TensorMap init_params(const ModelConfig& cfg, uint64_t seed);

}  // namespace pmmut::model
