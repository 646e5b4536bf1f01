// Copyright (c) 2026 pmmut contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pmmut/tensor.hpp"

namespace pmmut::corpus {

// Phone prototypes with duration statistics. Prototype vectors are pairwise
// separated by at least the construction margin.
struct PhoneInventory {
  struct Phone {
    std::vector<double> prototype;  // feat_dim entries
    double mean_dur = 5.5;
    double dur_spread = 2.5;
  };
  int feat_dim = 0;
  std::vector<Phone> phones;

  int size() const { return static_cast<int>(phones.size()); }
  double min_pairwise_distance() const;
};

// word -> phone id sequence; iteration order is insertion order so file
// output is deterministic.
struct Lexicon {
  std::vector<std::string> words;
  std::map<std::string, std::vector<int>> pron;

  bool contains(const std::string& w) const { return pron.count(w) > 0; }
  const std::vector<int>& phones_of(const std::string& w) const;
};

// One aligned phone realization; frames [begin, end), end exclusive.
struct AlignSpan {
  int phone = 0;
  int word_index = 0;
  int begin = 0;
  int end = 0;
};

using PhoneAlignment = std::vector<AlignSpan>;

struct Utterance {
  std::string id;
  Tensor feats;  // T x F
  std::vector<std::string> words;
  PhoneAlignment alignment;

  int frames() const { return feats.empty() ? 0 : feats.dim(0); }
};

// Evaluation-side phonetic-reduction simulation: a fraction of phones is
// shortened (frames dropped symmetrically from span edges) and attenuated.
struct ReductionSpec {
  double fraction = 0.3;
  double shrink = 0.4;
  double attenuation = 0.5;
  double noise = 0.0;

  void validate() const;
};

struct Corpus {
  PhoneInventory inventory;
  Lexicon lexicon;
  std::vector<Utterance> utts;
};

// Spelling convention: phone id k is written as the letter 'a' + k, and a
// word is spelled by its phones, so graphemes and phones stay in lockstep.
std::string word_spelling(const std::vector<int>& phones);

PhoneInventory make_inventory(int n_phones, int feat_dim, double margin, uint64_t seed);

Lexicon make_lexicon(const PhoneInventory& inv, int n_words, int min_phones,
                     int max_phones, uint64_t seed);

// Draws words uniformly, realizes each phone as its prototype repeated for a
// sampled duration plus Gaussian noise, and records exact spans.
// Deterministic per seed.
std::vector<Utterance> generate_corpus(const PhoneInventory& inv, const Lexicon& lex,
                                       int n_utts, int min_words, int max_words,
                                       double noise, uint64_t seed);

Utterance apply_reduction(const Utterance& utt, const ReductionSpec& spec, uint64_t seed);

// Throws unless spans are contiguous, non-overlapping, cover [0, T) exactly,
// and word indices are non-decreasing.
void validate_alignment(const Utterance& utt);

void write_corpus(const Corpus& corpus, const std::string& dir);
Corpus read_corpus(const std::string& dir);

}  // namespace pmmut::corpus
