// Copyright (c) 2026 pmmut contributors
// SPDX-License-Identifier: Apache-2.0

#include "pmmut/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace pmmut::tok {

namespace {

std::vector<std::string> split_words(const std::string& sentence) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : sentence) {
    if (c == ' ') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

const std::vector<std::string>& reserved_tokens() {
  static const std::vector<std::string> toks = {"<blk>", "<unk>", "<sos>", "<eos>"};
  return toks;
}

}  // namespace

int TokenizerModel::token_id(const std::string& tok) const {
  for (size_t i = 0; i < id_to_token.size(); ++i) {
    if (id_to_token[i] == tok) return static_cast<int>(i);
  }
  return -1;
}

std::vector<std::string> word_symbols(const std::string& word) {
  std::vector<std::string> symbols;
  for (size_t i = 0; i < word.size(); ++i) {
    std::string s(1, word[i]);
    if (i == 0) s = kWordMarker + s;
    symbols.push_back(std::move(s));
  }
  return symbols;
}

TokenizerModel train_bpe(const std::vector<std::string>& sentences, int target_vocab) {
  std::map<std::string, long long> word_count;
  for (const auto& s : sentences) {
    for (const auto& w : split_words(s)) ++word_count[w];
  }
  if (word_count.empty()) throw Error("train_bpe: empty corpus");

  struct WordState {
    std::vector<std::string> symbols;
    long long count;
  };
  std::vector<WordState> words;
  std::set<std::string> alphabet;
  for (const auto& [w, c] : word_count) {
    WordState ws{word_symbols(w), c};
    for (const auto& s : ws.symbols) alphabet.insert(s);
    words.push_back(std::move(ws));
  }

  const int base = kNumReserved + static_cast<int>(alphabet.size());
  if (target_vocab < base) {
    throw Error("train_bpe: target vocab " + std::to_string(target_vocab) +
                " below reserved + alphabet = " + std::to_string(base));
  }

  TokenizerModel model;
  for (const auto& t : reserved_tokens()) model.id_to_token.push_back(t);
  for (const auto& s : alphabet) model.id_to_token.push_back(s);

  const int n_merges = target_vocab - base;
  for (int m = 0; m < n_merges; ++m) {
    std::map<std::pair<std::string, std::string>, long long> pair_count;
    for (const auto& ws : words) {
      for (size_t i = 0; i + 1 < ws.symbols.size(); ++i) {
        pair_count[{ws.symbols[i], ws.symbols[i + 1]}] += ws.count;
      }
    }
    if (pair_count.empty()) break;
    // highest count, lexicographically smallest pair on ties; std::map
    // iterates in pair order so the first maximum wins
    auto best = pair_count.begin();
    for (auto it = pair_count.begin(); it != pair_count.end(); ++it) {
      if (it->second > best->second) best = it;
    }
    const auto [left, right] = best->first;
    const std::string joined = left + right;
    for (auto& ws : words) {
      std::vector<std::string> out;
      out.reserve(ws.symbols.size());
      size_t i = 0;
      while (i < ws.symbols.size()) {
        if (i + 1 < ws.symbols.size() && ws.symbols[i] == left && ws.symbols[i + 1] == right) {
          out.push_back(joined);
          i += 2;
        } else {
          out.push_back(ws.symbols[i]);
          ++i;
        }
      }
      ws.symbols = std::move(out);
    }
    model.merges.emplace_back(left, right);
    model.id_to_token.push_back(joined);
  }
  return model;
}

std::vector<std::string> apply_merges(
    std::vector<std::string> symbols,
    const std::vector<std::pair<std::string, std::string>>& merges) {
  for (;;) {
    size_t best_rank = merges.size();
    for (size_t i = 0; i + 1 < symbols.size(); ++i) {
      for (size_t r = 0; r < best_rank; ++r) {
        if (symbols[i] == merges[r].first && symbols[i + 1] == merges[r].second) {
          best_rank = r;
          break;
        }
      }
    }
    if (best_rank == merges.size()) break;
    const auto& [left, right] = merges[best_rank];
    std::vector<std::string> out;
    out.reserve(symbols.size());
    size_t i = 0;
    while (i < symbols.size()) {
      if (i + 1 < symbols.size() && symbols[i] == left && symbols[i + 1] == right) {
        out.push_back(left + right);
        i += 2;
      } else {
        out.push_back(symbols[i]);
        ++i;
      }
    }
    symbols = std::move(out);
  }
  return symbols;
}

std::vector<int> encode(const TokenizerModel& model, const std::string& sentence, bool strict) {
  std::vector<int> ids;
  for (const auto& w : split_words(sentence)) {
    for (const auto& sym : apply_merges(word_symbols(w), model.merges)) {
      const int id = model.token_id(sym);
      if (id >= 0) {
        ids.push_back(id);
      } else if (strict) {
        throw Error("encode: symbol '" + sym + "' outside vocabulary");
      } else {
        ids.push_back(kUnkId);
      }
    }
  }
  return ids;
}

std::string decode(const TokenizerModel& model, const std::vector<int>& ids) {
  std::string out;
  for (int id : ids) {
    if (id < 0 || id >= model.vocab_size()) throw Error("decode: id out of range");
    if (id < kNumReserved) continue;
    const std::string& tok = model.id_to_token[static_cast<size_t>(id)];
    if (tok.rfind(kWordMarker, 0) == 0) {
      if (!out.empty()) out += ' ';
      out += tok.substr(kWordMarker.size());
    } else {
      out += tok;
    }
  }
  return out;
}

void save_tokenizer(const TokenizerModel& model, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write tokenizer: " + path);
  f << "[merges]\n";
  for (const auto& [l, r] : model.merges) f << l << "\t" << r << "\n";
  f << "[vocab]\n";
  for (size_t i = 0; i < model.id_to_token.size(); ++i) {
    f << model.id_to_token[i] << "\t" << i << "\n";
  }
}

TokenizerModel load_tokenizer(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot read tokenizer: " + path);
  TokenizerModel model;
  std::string line;
  enum class Section { kNone, kMerges, kVocab } section = Section::kNone;
  std::map<int, std::string> vocab;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (line == "[merges]") {
      section = Section::kMerges;
      continue;
    }
    if (line == "[vocab]") {
      section = Section::kVocab;
      continue;
    }
    const size_t tab = line.find('\t');
    if (tab == std::string::npos || section == Section::kNone) {
      throw Error("tokenizer file: malformed line '" + line + "'");
    }
    if (section == Section::kMerges) {
      model.merges.emplace_back(line.substr(0, tab), line.substr(tab + 1));
    } else {
      vocab[std::stoi(line.substr(tab + 1))] = line.substr(0, tab);
    }
  }
  for (const auto& [id, tok] : vocab) {
    if (id != static_cast<int>(model.id_to_token.size())) {
      throw Error("tokenizer file: vocabulary ids not dense");
    }
    model.id_to_token.push_back(tok);
  }
  if (model.vocab_size() < kNumReserved) throw Error("tokenizer file: missing reserved ids");
  return model;
}

std::vector<int> phonemize(const corpus::Lexicon& lex, const std::string& sentence) {
  std::vector<int> out;
  for (const auto& w : split_words(sentence)) {
    const auto& phones = lex.phones_of(w);
    out.insert(out.end(), phones.begin(), phones.end());
  }
  return out;
}

}  // namespace pmmut::tok
