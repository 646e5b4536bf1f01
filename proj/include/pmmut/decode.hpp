// Copyright (c) 2026 pmmut contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "pmmut/model.hpp"

namespace pmmut::decode {

struct DecodeConfig {
  double lambda = 0.6;      // attention weight in the joint score
  int beam = 10;
  int max_len_margin = 10;  // max output length = T' + margin
  double eos_margin = 0.0;  // eos accepted if within margin of best expansion
};

struct Hypothesis {
  std::vector<int> tokens;  // sos ... eos when finalized
  double att_score = 0.0;
  double ctc_score = 0.0;
  double combined = 0.0;
  bool finalized = false;
};

// Label-synchronous beam over decoder steps; every expansion is scored
// lambda * log P_dec + (1 - lambda) * CTC prefix score. lambda = 1 bypasses
// the CTC scorer, lambda = 0 bypasses the decoder. Ties break toward the
// lexicographically smaller token sequence. Returns finalized hypotheses,
// best first.
std::vector<Hypothesis> joint_beam_search(const model::Model& m,
                                          const model::ForwardOutput& enc,
                                          const DecodeConfig& cfg);
std::vector<Hypothesis> joint_beam_search(const model::Model& m, const Tensor& feats,
                                          const DecodeConfig& cfg);

// Independent attention-only beam search; the lambda = 1 joint beam must
// match it token for token.
std::vector<Hypothesis> attention_beam_search(const model::Model& m,
                                              const model::ForwardOutput& enc,
                                              int beam, int max_len_margin,
                                              double eos_margin = 0.0);

// Independent CTC prefix beam search over a word-piece lattice; the
// lambda = 0 joint beam must match its best hypothesis.
std::vector<Hypothesis> ctc_prefix_search(const Tensor& wp_lattice, int beam,
                                          int max_len_margin, double eos_margin = 0.0);

// Argmax rollout of the decoder (equivalent to beam 1 at lambda = 1).
std::vector<int> greedy_attention_rollout(const model::Model& m,
                                          const model::ForwardOutput& enc,
                                          int max_len_margin);

// --- error-rate metrics -------------------------------------------------

struct EditCounts {
  long long dist = 0;
  long long subs = 0;
  long long ins = 0;
  long long dels = 0;
  long long ref_len = 0;

  double rate() const {
    return ref_len > 0 ? static_cast<double>(dist) / static_cast<double>(ref_len)
                       : (dist > 0 ? 1.0 : 0.0);
  }
};

// Levenshtein with unit costs and deterministic tie preference
// (match/substitute, then delete, then insert).
template <typename T>
EditCounts edit_distance(const std::vector<T>& ref, const std::vector<T>& hyp) {
  const size_t n = ref.size(), m = hyp.size();
  struct Cell {
    long long dist, subs, ins, dels;
  };
  std::vector<Cell> prev(m + 1), cur(m + 1);
  for (size_t j = 0; j <= m; ++j) prev[j] = {static_cast<long long>(j), 0, static_cast<long long>(j), 0};
  for (size_t i = 1; i <= n; ++i) {
    cur[0] = {static_cast<long long>(i), 0, 0, static_cast<long long>(i)};
    for (size_t j = 1; j <= m; ++j) {
      const bool same = ref[i - 1] == hyp[j - 1];
      Cell diag = prev[j - 1];
      diag.dist += same ? 0 : 1;
      diag.subs += same ? 0 : 1;
      Cell del = prev[j];
      del.dist += 1;
      del.dels += 1;
      Cell ins = cur[j - 1];
      ins.dist += 1;
      ins.ins += 1;
      Cell best = diag;
      if (del.dist < best.dist) best = del;
      if (ins.dist < best.dist) best = ins;
      cur[j] = best;
    }
    std::swap(prev, cur);
  }
  EditCounts out;
  out.dist = prev[m].dist;
  out.subs = prev[m].subs;
  out.ins = prev[m].ins;
  out.dels = prev[m].dels;
  out.ref_len = static_cast<long long>(n);
  return out;
}

// Micro-averaged totals over aligned reference/hypothesis lists.
template <typename T>
EditCounts edit_distance_total(const std::vector<std::vector<T>>& refs,
                               const std::vector<std::vector<T>>& hyps) {
  if (refs.size() != hyps.size()) {
    throw Error("edit_distance_total: ref/hyp list length mismatch");
  }
  EditCounts total;
  for (size_t i = 0; i < refs.size(); ++i) {
    const EditCounts c = edit_distance(refs[i], hyps[i]);
    total.dist += c.dist;
    total.subs += c.subs;
    total.ins += c.ins;
    total.dels += c.dels;
    total.ref_len += c.ref_len;
  }
  return total;
}

struct Metrics {
  EditCounts word;   // WER
  EditCounts piece;  // TER
  EditCounts phone;  // PER (greedy intermediate decode; meaningful only for
                     // phoneme intermediate units)
  bool has_per = false;

  double wer() const { return word.rate(); }
  double ter() const { return piece.rate(); }
  double per() const { return phone.rate(); }
};

}  // namespace pmmut::decode
