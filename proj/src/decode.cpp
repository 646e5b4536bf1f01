// Copyright (c) 2026 pmmut contributors
// SPDX-License-Identifier: Apache-2.0

#include "pmmut/decode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pmmut/ctc.hpp"
#include "pmmut/tokenizer.hpp"

namespace pmmut::decode {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool better(const Hypothesis& a, const Hypothesis& b) {
  if (a.combined != b.combined) return a.combined > b.combined;
  return a.tokens < b.tokens;  // deterministic: smaller token sequence first
}

void sort_hyps(std::vector<Hypothesis>& hyps) {
  std::sort(hyps.begin(), hyps.end(), better);
}

struct BeamItem {
  Hypothesis hyp;
  ctc::PrefixState state;  // untouched when the CTC scorer is bypassed
};

// First expandable real piece; blank/unk/sos are never emitted.
int first_piece(int /*vocab*/) { return tok::kNumReserved; }

}  // namespace

std::vector<Hypothesis> joint_beam_search(const model::Model& m,
                                          const model::ForwardOutput& enc,
                                          const DecodeConfig& cfg) {
  if (cfg.lambda < 0.0 || cfg.lambda > 1.0) throw Error("decode: lambda must be in [0,1]");
  if (cfg.beam < 1) throw Error("decode: beam must be >= 1");
  const int vocab = m.config().v_wp;
  const int max_len = enc.h_wplr.dim(0) + cfg.max_len_margin;
  const bool use_att = cfg.lambda > 0.0;
  const bool use_ctc = cfg.lambda < 1.0;

  ctc::PrefixScorer scorer(enc.wp_lattice);
  std::vector<BeamItem> live;
  {
    BeamItem root;
    root.hyp.tokens = {tok::kSosId};
    root.state = scorer.init();
    root.hyp.ctc_score = use_ctc ? root.state.score : 0.0;
    root.hyp.combined = cfg.lambda * root.hyp.att_score + (1.0 - cfg.lambda) * root.hyp.ctc_score;
    live.push_back(std::move(root));
  }

  std::vector<Hypothesis> finalized;
  for (int step = 0; step < max_len && !live.empty(); ++step) {
    struct Cand {
      Hypothesis hyp;
      ctc::PrefixState state;
    };
    std::vector<Cand> cands;
    for (const BeamItem& item : live) {
      Tensor logp;
      if (use_att) {
        logp = m.decoder_forward(enc.h_wplr, item.hyp.tokens);
      }
      const int last_row = static_cast<int>(item.hyp.tokens.size()) - 1;
      auto att_of = [&](int v) {
        return use_att ? item.hyp.att_score + logp.at(last_row, v) : 0.0;
      };

      double best_non_eos = kNegInf;
      const size_t first_cand = cands.size();
      for (int v = first_piece(vocab); v < vocab; ++v) {
        Cand c;
        c.hyp.tokens = item.hyp.tokens;
        c.hyp.tokens.push_back(v);
        c.hyp.att_score = att_of(v);
        if (use_ctc) {
          c.state = scorer.extend(item.state, v);
          c.hyp.ctc_score = c.state.score;
        }
        c.hyp.combined =
            cfg.lambda * c.hyp.att_score + (1.0 - cfg.lambda) * c.hyp.ctc_score;
        best_non_eos = std::max(best_non_eos, c.hyp.combined);
        cands.push_back(std::move(c));
      }
      (void)first_cand;

      // eos: the CTC term is the full-sequence probability of the prefix;
      // accepted only against this hypothesis' own best continuation
      Hypothesis ended;
      ended.tokens = item.hyp.tokens;
      ended.tokens.push_back(tok::kEosId);
      ended.att_score = att_of(tok::kEosId);
      ended.ctc_score = use_ctc ? scorer.full_sequence_score(item.state) : 0.0;
      ended.combined = cfg.lambda * ended.att_score + (1.0 - cfg.lambda) * ended.ctc_score;
      ended.finalized = true;
      if (ended.combined >= best_non_eos - cfg.eos_margin) finalized.push_back(std::move(ended));
    }

    std::sort(cands.begin(), cands.end(),
              [](const Cand& a, const Cand& b) { return better(a.hyp, b.hyp); });

    std::vector<BeamItem> next;
    for (auto& c : cands) {
      if (static_cast<int>(next.size()) >= cfg.beam) break;
      next.push_back({std::move(c.hyp), std::move(c.state)});
    }
    live = std::move(next);

    if (!finalized.empty() && !live.empty()) {
      double best_final = kNegInf;
      for (const auto& h : finalized) best_final = std::max(best_final, h.combined);
      // expansion scores never increase, so nothing live can catch up
      if (best_final >= live.front().hyp.combined) break;
    }
  }

  // out of steps: close the remaining prefixes with eos
  for (const auto& item : live) {
    Hypothesis h = item.hyp;
    h.tokens.push_back(tok::kEosId);
    if (use_att) {
      Tensor logp = m.decoder_forward(enc.h_wplr, item.hyp.tokens);
      h.att_score += logp.at(static_cast<int>(item.hyp.tokens.size()) - 1, tok::kEosId);
    }
    h.ctc_score = use_ctc ? scorer.full_sequence_score(item.state) : 0.0;
    h.combined = cfg.lambda * h.att_score + (1.0 - cfg.lambda) * h.ctc_score;
    h.finalized = true;
    finalized.push_back(std::move(h));
  }

  sort_hyps(finalized);
  if (static_cast<int>(finalized.size()) > cfg.beam) finalized.resize(static_cast<size_t>(cfg.beam));
  return finalized;
}

std::vector<Hypothesis> joint_beam_search(const model::Model& m, const Tensor& feats,
                                          const DecodeConfig& cfg) {
  return joint_beam_search(m, m.encoder_forward(feats, /*train=*/false), cfg);
}

std::vector<Hypothesis> attention_beam_search(const model::Model& m,
                                              const model::ForwardOutput& enc,
                                              int beam, int max_len_margin,
                                              double eos_margin) {
  if (beam < 1) throw Error("decode: beam must be >= 1");
  const int vocab = m.config().v_wp;
  const int max_len = enc.h_wplr.dim(0) + max_len_margin;

  std::vector<Hypothesis> live(1);
  live[0].tokens = {tok::kSosId};
  std::vector<Hypothesis> finalized;

  for (int step = 0; step < max_len && !live.empty(); ++step) {
    std::vector<Hypothesis> cands;
    for (const auto& h : live) {
      Tensor logp = m.decoder_forward(enc.h_wplr, h.tokens);
      const int row = static_cast<int>(h.tokens.size()) - 1;
      double best_non_eos = kNegInf;
      for (int v = first_piece(vocab); v < vocab; ++v) {
        Hypothesis c = h;
        c.tokens.push_back(v);
        c.att_score += logp.at(row, v);
        c.combined = c.att_score;
        best_non_eos = std::max(best_non_eos, c.combined);
        cands.push_back(std::move(c));
      }
      Hypothesis ended = h;
      ended.tokens.push_back(tok::kEosId);
      ended.att_score += logp.at(row, tok::kEosId);
      ended.combined = ended.att_score;
      ended.finalized = true;
      if (ended.combined >= best_non_eos - eos_margin) finalized.push_back(std::move(ended));
    }
    sort_hyps(cands);
    std::vector<Hypothesis> next;
    for (auto& c : cands) {
      if (static_cast<int>(next.size()) >= beam) break;
      next.push_back(std::move(c));
    }
    live = std::move(next);
    if (!finalized.empty() && !live.empty()) {
      double best_final = kNegInf;
      for (const auto& h : finalized) best_final = std::max(best_final, h.combined);
      if (best_final >= live.front().combined) break;
    }
  }
  for (const auto& h : live) {
    Tensor logp = m.decoder_forward(enc.h_wplr, h.tokens);
    Hypothesis c = h;
    c.att_score += logp.at(static_cast<int>(h.tokens.size()) - 1, tok::kEosId);
    c.tokens.push_back(tok::kEosId);
    c.combined = c.att_score;
    c.finalized = true;
    finalized.push_back(std::move(c));
  }
  sort_hyps(finalized);
  if (static_cast<int>(finalized.size()) > beam) finalized.resize(static_cast<size_t>(beam));
  return finalized;
}

std::vector<Hypothesis> ctc_prefix_search(const Tensor& wp_lattice, int beam,
                                          int max_len_margin, double eos_margin) {
  if (beam < 1) throw Error("decode: beam must be >= 1");
  const int vocab = wp_lattice.dim(1);
  const int max_len = wp_lattice.dim(0) + max_len_margin;
  ctc::PrefixScorer scorer(wp_lattice);

  std::vector<BeamItem> live(1);
  live[0].hyp.tokens = {tok::kSosId};
  live[0].state = scorer.init();
  live[0].hyp.ctc_score = live[0].state.score;
  live[0].hyp.combined = live[0].hyp.ctc_score;
  std::vector<Hypothesis> finalized;

  for (int step = 0; step < max_len && !live.empty(); ++step) {
    struct Cand {
      Hypothesis hyp;
      ctc::PrefixState state;
    };
    std::vector<Cand> cands;
    for (const auto& item : live) {
      double best_non_eos = kNegInf;
      for (int v = first_piece(vocab); v < vocab; ++v) {
        Cand c;
        c.state = scorer.extend(item.state, v);
        c.hyp = item.hyp;
        c.hyp.tokens.push_back(v);
        c.hyp.ctc_score = c.state.score;
        c.hyp.combined = c.hyp.ctc_score;
        best_non_eos = std::max(best_non_eos, c.hyp.combined);
        cands.push_back(std::move(c));
      }
      Hypothesis ended = item.hyp;
      ended.tokens.push_back(tok::kEosId);
      ended.ctc_score = scorer.full_sequence_score(item.state);
      ended.combined = ended.ctc_score;
      ended.finalized = true;
      if (ended.combined >= best_non_eos - eos_margin) finalized.push_back(std::move(ended));
    }
    std::sort(cands.begin(), cands.end(),
              [](const Cand& a, const Cand& b) { return better(a.hyp, b.hyp); });
    std::vector<BeamItem> next;
    for (auto& c : cands) {
      if (static_cast<int>(next.size()) >= beam) break;
      next.push_back({std::move(c.hyp), std::move(c.state)});
    }
    live = std::move(next);
    if (!finalized.empty() && !live.empty()) {
      double best_final = kNegInf;
      for (const auto& h : finalized) best_final = std::max(best_final, h.combined);
      if (best_final >= live.front().hyp.combined) break;
    }
  }
  for (const auto& item : live) {
    Hypothesis h = item.hyp;
    h.tokens.push_back(tok::kEosId);
    h.ctc_score = scorer.full_sequence_score(item.state);
    h.combined = h.ctc_score;
    h.finalized = true;
    finalized.push_back(std::move(h));
  }
  sort_hyps(finalized);
  if (static_cast<int>(finalized.size()) > beam) finalized.resize(static_cast<size_t>(beam));
  return finalized;
}

std::vector<int> greedy_attention_rollout(const model::Model& m,
                                          const model::ForwardOutput& enc,
                                          int max_len_margin) {
  const int vocab = m.config().v_wp;
  const int max_len = enc.h_wplr.dim(0) + max_len_margin;
  std::vector<int> tokens = {tok::kSosId};
  for (int step = 0; step < max_len; ++step) {
    Tensor logp = m.decoder_forward(enc.h_wplr, tokens);
    const int row = static_cast<int>(tokens.size()) - 1;
    int best = tok::kEosId;
    for (int v = first_piece(vocab); v < vocab; ++v) {
      if (logp.at(row, v) > logp.at(row, best)) best = v;
    }
    tokens.push_back(best);
    if (best == tok::kEosId) return tokens;
  }
  tokens.push_back(tok::kEosId);
  return tokens;
}

}  // namespace pmmut::decode
