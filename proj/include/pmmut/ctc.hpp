// Copyright (c) 2026 pmmut contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "pmmut/tensor.hpp"

namespace pmmut::ctc {

// Blank id is 0 for every CTC head in the project.
constexpr int kBlank = 0;

// A CTC instance: a T x V lattice of row-normalized log-probabilities and a
// target label sequence with ids in [1, V).
struct CtcProblem {
  const Tensor* log_probs = nullptr;  // T x V
  std::vector<int> targets;
};

struct CtcResult {
  double nll = 0.0;
  Tensor grad;  // d nll / d log_probs, same shape as the lattice
};

// Number of adjacent equal label pairs in z; feasibility needs
// T >= U + repeats(z).
int repeats(const std::vector<int>& z);

// Throws Error when the lattice is malformed, a target id is out of range,
// or the target is infeasible for the given T.
void validate(const CtcProblem& p);

// Exact negative log-likelihood over all blank-augmented alignments, by
// forward-backward in log space, with the analytic lattice gradient.
CtcResult ctc_loss(const CtcProblem& p);

// Same computation without the CtcProblem invariant checks. The loss extends
// smoothly to unnormalized lattices; finite-difference probes evaluate here.
CtcResult ctc_loss_unchecked(const CtcProblem& p);

// Enumeration oracle: sums path probabilities over all V^T frame labelings
// that collapse to the target. Requires V^T <= 1e7.
double ctc_brute_force(const CtcProblem& p);

// Per-frame argmax, collapse repeats, drop blanks.
std::vector<int> ctc_greedy_decode(const Tensor& log_probs);

// Incremental prefix scoring for label-synchronous beam search.
// State holds, per frame, the log-probability of emitting the prefix with the
// last symbol ending in a non-blank (r_n) or a blank (r_b).
struct PrefixState {
  std::vector<double> r_n;
  std::vector<double> r_b;
  int last_token = -1;   // -1 for the empty prefix
  double score = 0.0;    // log prefix probability of the hypothesis
};

class PrefixScorer {
 public:
  explicit PrefixScorer(const Tensor& log_probs);

  // State of the empty prefix; its score is the all-blank path probability.
  PrefixState init() const;

  // Extends the prefix with token c; returns the new state whose .score is
  // log P(prefix c ...) over the lattice.
  PrefixState extend(const PrefixState& s, int token) const;

  // Log-probability that the lattice emits exactly the prefix held by s.
  double full_sequence_score(const PrefixState& s) const;

  int frames() const { return frames_; }
  int vocab() const { return vocab_; }

 private:
  const Tensor* log_probs_;
  int frames_ = 0;
  int vocab_ = 0;
};

}  // namespace pmmut::ctc
