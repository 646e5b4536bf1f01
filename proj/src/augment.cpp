// Copyright (c) 2026 pmmut contributors
// SPDX-License-Identifier: Apache-2.0

#include "pmmut/augment.hpp"

#include <algorithm>
#include <cmath>

namespace pmmut::augment {

namespace {

void check_alignment_matches(const Tensor& x, const corpus::PhoneAlignment& ali) {
  if (x.rank() != 2) throw Error("augment: features must be T x F");
  if (ali.empty()) throw Error("augment: empty alignment");
  int cursor = 0;
  for (const auto& span : ali) {
    if (span.begin != cursor || span.end <= span.begin) {
      throw Error("augment: alignment does not cover features");
    }
    cursor = span.end;
  }
  if (cursor != x.dim(0)) throw Error("augment: alignment/feature length mismatch");
}

}  // namespace

std::vector<bool> select_phones(const corpus::PhoneAlignment& ali, double p, Rng& rng) {
  std::vector<bool> out(ali.size());
  for (size_t i = 0; i < ali.size(); ++i) out[i] = rng.next_double() < p;
  return out;
}

Tensor mask_phones(const Tensor& mean_source, const Tensor& x,
                   const corpus::PhoneAlignment& ali, const std::vector<bool>& selected) {
  check_alignment_matches(x, ali);
  if (!mean_source.same_shape(x)) throw Error("mask_phones: mean source shape mismatch");
  if (selected.size() != ali.size()) throw Error("mask_phones: selection size mismatch");

  const int feat_dim = x.dim(1);
  Tensor out = x;

  // word frame ranges from consecutive spans sharing a word index
  size_t i = 0;
  std::vector<double> mean(static_cast<size_t>(feat_dim));
  while (i < ali.size()) {
    size_t j = i;
    while (j < ali.size() && ali[j].word_index == ali[i].word_index) ++j;
    const int w_begin = ali[i].begin;
    const int w_end = ali[j - 1].end;

    bool any = false;
    for (size_t k = i; k < j; ++k) any = any || selected[k];
    if (any) {
      std::fill(mean.begin(), mean.end(), 0.0);
      for (int t = w_begin; t < w_end; ++t) {
        for (int c = 0; c < feat_dim; ++c) mean[static_cast<size_t>(c)] += mean_source.at(t, c);
      }
      const double inv = 1.0 / (w_end - w_begin);
      for (int c = 0; c < feat_dim; ++c) mean[static_cast<size_t>(c)] *= inv;
      for (size_t k = i; k < j; ++k) {
        if (!selected[k]) continue;
        for (int t = ali[k].begin; t < ali[k].end; ++t) {
          for (int c = 0; c < feat_dim; ++c) out.at(t, c) = mean[static_cast<size_t>(c)];
        }
      }
    }
    i = j;
  }
  return out;
}

Tensor phone_mask(const Tensor& x, const corpus::PhoneAlignment& ali,
                  const MaskPolicy& policy, Rng& rng) {
  policy.validate();
  check_alignment_matches(x, ali);
  const std::vector<bool> selected = select_phones(ali, policy.p, rng);
  return mask_phones(x, x, ali, selected);
}

Tensor spec_augment(const Tensor& x, int n_time_masks, int max_time_width,
                    int n_feat_masks, int max_feat_width, Rng& rng) {
  if (x.rank() != 2) throw Error("spec_augment: features must be T x F");
  const int t_len = x.dim(0);
  const int feat_dim = x.dim(1);
  if (max_time_width > t_len) throw Error("spec_augment: time width exceeds T");
  if (max_feat_width > feat_dim) throw Error("spec_augment: feature width exceeds F");
  if (n_time_masks < 0 || n_feat_masks < 0 || max_time_width < 0 || max_feat_width < 0) {
    throw Error("spec_augment: negative mask parameters");
  }

  Tensor out = x;
  for (int m = 0; m < n_time_masks; ++m) {
    const int w = rng.next_int(0, max_time_width);
    const int start = rng.next_int(0, t_len - w);
    for (int t = start; t < start + w; ++t) {
      for (int c = 0; c < feat_dim; ++c) out.at(t, c) = 0.0;
    }
  }
  for (int m = 0; m < n_feat_masks; ++m) {
    const int w = rng.next_int(0, max_feat_width);
    const int start = rng.next_int(0, feat_dim - w);
    for (int t = 0; t < t_len; ++t) {
      for (int c = start; c < start + w; ++c) out.at(t, c) = 0.0;
    }
  }
  return out;
}

std::pair<Tensor, corpus::PhoneAlignment> speed_perturb(const Tensor& x,
                                                        const corpus::PhoneAlignment& ali,
                                                        double factor) {
  if (factor <= 0.0) throw Error("speed_perturb: factor must be positive");
  check_alignment_matches(x, ali);
  const int t_in = x.dim(0);
  const int feat_dim = x.dim(1);

  if (factor == 1.0) return {x, ali};

  const int t_out = std::max(1, static_cast<int>(std::lround(t_in / factor)));
  Tensor out({t_out, feat_dim});
  for (int t = 0; t < t_out; ++t) {
    const double pos = std::min(t * factor, static_cast<double>(t_in - 1));
    const int lo = static_cast<int>(pos);
    const int hi = std::min(lo + 1, t_in - 1);
    const double frac = pos - lo;
    for (int c = 0; c < feat_dim; ++c) {
      out.at(t, c) = x.at(lo, c) * (1.0 - frac) + x.at(hi, c) * frac;
    }
  }

  // rescale span ends, then repair: starts chained, strictly increasing,
  // last end forced to T'
  corpus::PhoneAlignment spans = ali;
  const int n = static_cast<int>(spans.size());
  if (t_out < n) throw Error("speed_perturb: output too short for alignment");
  int cursor = 0;
  for (int s = 0; s < n; ++s) {
    int end = static_cast<int>(std::lround(spans[static_cast<size_t>(s)].end / factor));
    end = std::max(end, cursor + 1);
    end = std::min(end, t_out - (n - 1 - s));  // leave room for the rest
    if (s == n - 1) end = t_out;
    spans[static_cast<size_t>(s)].begin = cursor;
    spans[static_cast<size_t>(s)].end = end;
    cursor = end;
  }
  return {std::move(out), std::move(spans)};
}

}  // namespace pmmut::augment
