// Copyright (c) 2026 pmmut contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "pmmut/corpus.hpp"

namespace pmmut::tok {

// Reserved ids shared with the CTC heads and the attention decoder.
constexpr int kBlankId = 0;
constexpr int kUnkId = 1;
constexpr int kSosId = 2;
constexpr int kEosId = 3;
constexpr int kNumReserved = 4;

// Marker prefixed to word-initial pieces so decoding is unambiguous.
inline const std::string kWordMarker = "▁";

struct TokenizerModel {
  std::vector<std::pair<std::string, std::string>> merges;  // rank order
  std::vector<std::string> id_to_token;                     // dense ids

  int vocab_size() const { return static_cast<int>(id_to_token.size()); }
  int token_id(const std::string& tok) const;  // -1 when absent
};

// Greedy pair-merge BPE over the word corpus. Ties on pair count break to
// the lexicographically smaller (left, right) pair, so training is
// deterministic for a fixed corpus.
TokenizerModel train_bpe(const std::vector<std::string>& sentences, int target_vocab);

// Splits a word into symbols (word-initial symbol carries the marker).
std::vector<std::string> word_symbols(const std::string& word);

// Applies merges to a symbol sequence in rank order; exposed for tests.
std::vector<std::string> apply_merges(
    std::vector<std::string> symbols,
    const std::vector<std::pair<std::string, std::string>>& merges);

// strict=true turns unknown symbols into an error instead of kUnkId.
std::vector<int> encode(const TokenizerModel& model, const std::string& sentence,
                        bool strict = false);
std::string decode(const TokenizerModel& model, const std::vector<int>& ids);

void save_tokenizer(const TokenizerModel& model, const std::string& path);
TokenizerModel load_tokenizer(const std::string& path);

// Concatenated per-word phone ids via the lexicon; error on unknown words.
std::vector<int> phonemize(const corpus::Lexicon& lex, const std::string& sentence);

}  // namespace pmmut::tok
