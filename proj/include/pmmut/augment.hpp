// Copyright (c) 2026 pmmut contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <utility>
#include <vector>

#include "pmmut/corpus.hpp"
#include "pmmut/rng.hpp"

namespace pmmut::augment {

struct MaskPolicy {
  double p = 0.15;  // per-phone Bernoulli mask probability

  void validate() const {
    if (p < 0.0 || p > 1.0) throw Error("mask policy: p must be in [0,1]");
  }
};

// Independent Bernoulli(p) selection per aligned phone.
std::vector<bool> select_phones(const corpus::PhoneAlignment& ali, double p, Rng& rng);

// Replaces every frame of each selected phone, per feature dimension, by the
// mean over all frames of the phone's containing word, with means taken from
// `mean_source`. Unselected frames are copied bit-identically.
Tensor mask_phones(const Tensor& mean_source, const Tensor& x,
                   const corpus::PhoneAlignment& ali, const std::vector<bool>& selected);

// Phone mask training transform: selection + masking with means from x itself.
Tensor phone_mask(const Tensor& x, const corpus::PhoneAlignment& ali,
                  const MaskPolicy& policy, Rng& rng);

// Zero-fill SpecAugment: n_time sampled time bands and n_feat feature bands.
Tensor spec_augment(const Tensor& x, int n_time_masks, int max_time_width,
                    int n_feat_masks, int max_feat_width, Rng& rng);

// Linear-interpolation resampling to T' = round(T / factor); alignment spans
// are rescaled by 1/factor and repaired to exact coverage.
std::pair<Tensor, corpus::PhoneAlignment> speed_perturb(const Tensor& x,
                                                        const corpus::PhoneAlignment& ali,
                                                        double factor);

}  // namespace pmmut::augment
