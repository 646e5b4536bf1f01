// Copyright (c) 2026 pmmut contributors
// SPDX-License-Identifier: Apache-2.0

#include "pmmut/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "pmmut/rng.hpp"

namespace fs = std::filesystem;

namespace pmmut::corpus {

namespace {

// exact round-trip formatting for doubles
std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

int sample_duration(const PhoneInventory::Phone& ph, Rng& rng) {
  const int lo = std::max(1, static_cast<int>(std::lround(ph.mean_dur - ph.dur_spread)));
  const int hi = std::max(lo, static_cast<int>(std::lround(ph.mean_dur + ph.dur_spread)));
  return rng.next_int(lo, hi);
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error("cannot open for writing: " + p.string());
  return f;
}

std::ifstream open_in(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw Error("cannot open for reading: " + p.string());
  return f;
}

}  // namespace

double PhoneInventory::min_pairwise_distance() const {
  double best = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < phones.size(); ++i) {
    for (size_t j = i + 1; j < phones.size(); ++j) {
      double d2 = 0.0;
      for (int c = 0; c < feat_dim; ++c) {
        const double d = phones[i].prototype[static_cast<size_t>(c)] -
                         phones[j].prototype[static_cast<size_t>(c)];
        d2 += d * d;
      }
      best = std::min(best, std::sqrt(d2));
    }
  }
  return best;
}

const std::vector<int>& Lexicon::phones_of(const std::string& w) const {
  auto it = pron.find(w);
  if (it == pron.end()) throw Error("word not in lexicon: '" + w + "'");
  return it->second;
}

void ReductionSpec::validate() const {
  if (fraction < 0.0 || fraction > 1.0) throw Error("reduction: fraction must be in [0,1]");
  if (shrink <= 0.0 || shrink > 1.0) throw Error("reduction: shrink must be in (0,1]");
  if (attenuation <= 0.0 || attenuation > 1.0) {
    throw Error("reduction: attenuation must be in (0,1]");
  }
  if (noise < 0.0) throw Error("reduction: noise must be >= 0");
}

std::string word_spelling(const std::vector<int>& phones) {
  std::string s;
  for (int p : phones) {
    if (p < 0 || p >= 26) throw Error("word_spelling: phone id out of letter range");
    s += static_cast<char>('a' + p);
  }
  return s;
}

PhoneInventory make_inventory(int n_phones, int feat_dim, double margin, uint64_t seed) {
  if (n_phones < 2 || n_phones > 26) throw Error("inventory: need 2..26 phones");
  if (feat_dim < 1) throw Error("inventory: feat_dim must be >= 1");
  PhoneInventory inv;
  inv.feat_dim = feat_dim;
  Rng rng(Rng::derive(seed, 0xC0DE));
  for (int p = 0; p < n_phones; ++p) {
    PhoneInventory::Phone ph;
    ph.prototype.resize(static_cast<size_t>(feat_dim));
    for (int c = 0; c < feat_dim; ++c) ph.prototype[static_cast<size_t>(c)] = rng.next_gaussian();
    inv.phones.push_back(std::move(ph));
  }
  const double dmin = inv.min_pairwise_distance();
  if (dmin < margin) {
    const double s = margin * 1.0001 / dmin;
    for (auto& ph : inv.phones) {
      for (double& v : ph.prototype) v *= s;
    }
  }
  return inv;
}

Lexicon make_lexicon(const PhoneInventory& inv, int n_words, int min_phones,
                     int max_phones, uint64_t seed) {
  if (n_words < 1) throw Error("lexicon: need at least one word");
  if (min_phones < 1 || max_phones < min_phones) throw Error("lexicon: bad phone range");
  Lexicon lex;
  Rng rng(Rng::derive(seed, 0x1E) /* lexicon stream */);
  std::set<std::vector<int>> seen;
  int guard = 0;
  while (static_cast<int>(lex.words.size()) < n_words) {
    if (++guard > n_words * 1000) throw Error("lexicon: cannot find enough distinct words");
    const int len = rng.next_int(min_phones, max_phones);
    std::vector<int> phones;
    for (int i = 0; i < len; ++i) phones.push_back(rng.next_int(0, inv.size() - 1));
    if (!seen.insert(phones).second) continue;
    std::string w = word_spelling(phones);
    lex.words.push_back(w);
    lex.pron[w] = std::move(phones);
  }
  return lex;
}

std::vector<Utterance> generate_corpus(const PhoneInventory& inv, const Lexicon& lex,
                                       int n_utts, int min_words, int max_words,
                                       double noise, uint64_t seed) {
  if (lex.words.empty()) throw Error("generate_corpus: empty lexicon");
  if (min_words < 1 || max_words < min_words) {
    throw Error("generate_corpus: utterance length range must start at >= 1 word");
  }
  if (n_utts < 1) throw Error("generate_corpus: need at least one utterance");

  std::vector<Utterance> utts;
  utts.reserve(static_cast<size_t>(n_utts));
  for (int u = 0; u < n_utts; ++u) {
    Rng rng(Rng::derive(seed, static_cast<uint64_t>(u)));
    Utterance utt;
    char idbuf[16];
    std::snprintf(idbuf, sizeof(idbuf), "utt%06d", u);
    utt.id = idbuf;

    const int n_words = rng.next_int(min_words, max_words);
    struct Realized {
      int phone;
      int word_index;
      int dur;
    };
    std::vector<Realized> plan;
    for (int w = 0; w < n_words; ++w) {
      const std::string& word = lex.words[static_cast<size_t>(rng.next_int(0, static_cast<int>(lex.words.size()) - 1))];
      utt.words.push_back(word);
      for (int p : lex.phones_of(word)) {
        plan.push_back({p, w, sample_duration(inv.phones[static_cast<size_t>(p)], rng)});
      }
    }
    int total = 0;
    for (const auto& r : plan) total += r.dur;

    utt.feats = Tensor({total, inv.feat_dim});
    int cursor = 0;
    for (const auto& r : plan) {
      const auto& proto = inv.phones[static_cast<size_t>(r.phone)].prototype;
      for (int t = 0; t < r.dur; ++t) {
        for (int c = 0; c < inv.feat_dim; ++c) {
          utt.feats.at(cursor + t, c) =
              proto[static_cast<size_t>(c)] + (noise > 0.0 ? noise * rng.next_gaussian() : 0.0);
        }
      }
      utt.alignment.push_back({r.phone, r.word_index, cursor, cursor + r.dur});
      cursor += r.dur;
    }
    validate_alignment(utt);
    utts.push_back(std::move(utt));
  }
  return utts;
}

Utterance apply_reduction(const Utterance& utt, const ReductionSpec& spec, uint64_t seed) {
  spec.validate();
  validate_alignment(utt);
  Rng rng(Rng::derive(seed, 0x5ED));

  struct Kept {
    int phone;
    int word_index;
    int src_begin;
    int len;
    bool reduced;
  };
  std::vector<Kept> kept;
  int total = 0;
  for (const auto& span : utt.alignment) {
    const int len = span.end - span.begin;
    const bool selected = rng.next_double() < spec.fraction;
    if (!selected) {
      kept.push_back({span.phone, span.word_index, span.begin, len, false});
      total += len;
      continue;
    }
    const int new_len = std::max(1, static_cast<int>(std::lround(len * spec.shrink)));
    const int drop = len - new_len;
    const int front = drop / 2;  // center retained
    kept.push_back({span.phone, span.word_index, span.begin + front, new_len, true});
    total += new_len;
  }

  Utterance out;
  out.id = utt.id;
  out.words = utt.words;
  out.feats = Tensor({total, utt.feats.dim(1)});
  const int feat_dim = utt.feats.dim(1);
  int cursor = 0;
  for (const auto& k : kept) {
    for (int t = 0; t < k.len; ++t) {
      for (int c = 0; c < feat_dim; ++c) {
        double v = utt.feats.at(k.src_begin + t, c);
        if (k.reduced) {
          v *= spec.attenuation;
          if (spec.noise > 0.0) v += spec.noise * rng.next_gaussian();
        }
        out.feats.at(cursor + t, c) = v;
      }
    }
    out.alignment.push_back({k.phone, k.word_index, cursor, cursor + k.len});
    cursor += k.len;
  }
  validate_alignment(out);
  return out;
}

void validate_alignment(const Utterance& utt) {
  const int t_len = utt.frames();
  if (utt.alignment.empty()) throw Error("alignment empty for " + utt.id);
  int cursor = 0;
  int last_word = 0;
  for (const auto& span : utt.alignment) {
    if (span.begin < cursor) throw Error("alignment overlap in " + utt.id);
    if (span.begin > cursor) throw Error("alignment gap in " + utt.id);
    if (span.end <= span.begin) throw Error("empty alignment span in " + utt.id);
    if (span.word_index < last_word) throw Error("alignment word order in " + utt.id);
    last_word = span.word_index;
    cursor = span.end;
  }
  if (cursor != t_len) {
    throw Error("alignment does not cover features in " + utt.id + ": spans end at " +
                std::to_string(cursor) + ", T = " + std::to_string(t_len));
  }
}

void write_corpus(const Corpus& corpus, const std::string& dir) {
  fs::create_directories(fs::path(dir) / "feats");
  fs::create_directories(fs::path(dir) / "align");

  {
    auto f = open_out(fs::path(dir) / "inventory.tsv");
    for (int p = 0; p < corpus.inventory.size(); ++p) {
      const auto& ph = corpus.inventory.phones[static_cast<size_t>(p)];
      f << p << "\t" << fmt_double(ph.mean_dur) << "\t" << fmt_double(ph.dur_spread) << "\t";
      for (size_t c = 0; c < ph.prototype.size(); ++c) {
        if (c) f << " ";
        f << fmt_double(ph.prototype[c]);
      }
      f << "\n";
    }
  }
  {
    auto f = open_out(fs::path(dir) / "lexicon.tsv");
    for (const auto& w : corpus.lexicon.words) {
      f << w << "\t";
      const auto& ph = corpus.lexicon.pron.at(w);
      for (size_t i = 0; i < ph.size(); ++i) {
        if (i) f << " ";
        f << ph[i];
      }
      f << "\n";
    }
  }
  {
    auto meta = open_out(fs::path(dir) / "meta.tsv");
    for (const auto& utt : corpus.utts) {
      meta << utt.id << "\t";
      for (size_t i = 0; i < utt.words.size(); ++i) {
        if (i) meta << " ";
        meta << utt.words[i];
      }
      meta << "\n";
    }
  }
  for (const auto& utt : corpus.utts) {
    {
      auto f = open_out(fs::path(dir) / "feats" / (utt.id + ".fbin"));
      f.write("PMFB", 4);
      const uint32_t t_len = static_cast<uint32_t>(utt.feats.dim(0));
      const uint32_t feat_dim = static_cast<uint32_t>(utt.feats.dim(1));
      f.write(reinterpret_cast<const char*>(&t_len), 4);
      f.write(reinterpret_cast<const char*>(&feat_dim), 4);
      f.write(reinterpret_cast<const char*>(utt.feats.data()),
              static_cast<std::streamsize>(utt.feats.numel() * sizeof(double)));
    }
    {
      auto f = open_out(fs::path(dir) / "align" / (utt.id + ".tsv"));
      for (const auto& span : utt.alignment) {
        f << span.phone << "\t" << span.word_index << "\t" << span.begin << "\t"
          << span.end << "\n";
      }
    }
  }
}

Corpus read_corpus(const std::string& dir) {
  Corpus corpus;
  {
    auto f = open_in(fs::path(dir) / "inventory.tsv");
    std::string line;
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      auto cols = split(line, '\t');
      if (cols.size() != 4) throw Error("inventory.tsv: malformed line");
      PhoneInventory::Phone ph;
      ph.mean_dur = std::stod(cols[1]);
      ph.dur_spread = std::stod(cols[2]);
      for (const auto& tok : split(cols[3], ' ')) ph.prototype.push_back(std::stod(tok));
      if (corpus.inventory.feat_dim == 0) {
        corpus.inventory.feat_dim = static_cast<int>(ph.prototype.size());
      } else if (corpus.inventory.feat_dim != static_cast<int>(ph.prototype.size())) {
        throw Error("inventory.tsv: inconsistent feature dims");
      }
      corpus.inventory.phones.push_back(std::move(ph));
    }
    if (corpus.inventory.phones.empty()) throw Error("inventory.tsv: empty");
  }
  {
    auto f = open_in(fs::path(dir) / "lexicon.tsv");
    std::string line;
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      auto cols = split(line, '\t');
      if (cols.size() != 2) throw Error("lexicon.tsv: malformed line");
      std::vector<int> phones;
      for (const auto& tok : split(cols[1], ' ')) {
        const int p = std::stoi(tok);
        if (p < 0 || p >= corpus.inventory.size()) throw Error("lexicon.tsv: phone id out of range");
        phones.push_back(p);
      }
      if (phones.empty()) throw Error("lexicon.tsv: word with no phones");
      corpus.lexicon.words.push_back(cols[0]);
      corpus.lexicon.pron[cols[0]] = std::move(phones);
    }
  }
  {
    auto meta = open_in(fs::path(dir) / "meta.tsv");
    std::string line;
    while (std::getline(meta, line)) {
      if (line.empty()) continue;
      auto cols = split(line, '\t');
      if (cols.size() != 2) throw Error("meta.tsv: malformed line");
      Utterance utt;
      utt.id = cols[0];
      for (const auto& w : split(cols[1], ' ')) {
        if (!w.empty()) utt.words.push_back(w);
      }

      auto f = open_in(fs::path(dir) / "feats" / (utt.id + ".fbin"));
      char magic[4];
      f.read(magic, 4);
      if (f.gcount() != 4 || std::string(magic, 4) != "PMFB") {
        throw Error("feats: bad magic for " + utt.id);
      }
      uint32_t t_len = 0, feat_dim = 0;
      f.read(reinterpret_cast<char*>(&t_len), 4);
      f.read(reinterpret_cast<char*>(&feat_dim), 4);
      if (!f || t_len == 0 || feat_dim == 0) throw Error("feats: bad header for " + utt.id);
      utt.feats = Tensor({static_cast<int>(t_len), static_cast<int>(feat_dim)});
      f.read(reinterpret_cast<char*>(utt.feats.data()),
             static_cast<std::streamsize>(utt.feats.numel() * sizeof(double)));
      if (static_cast<size_t>(f.gcount()) != utt.feats.numel() * sizeof(double)) {
        throw Error("feats: truncated payload for " + utt.id);
      }

      auto a = open_in(fs::path(dir) / "align" / (utt.id + ".tsv"));
      std::string aline;
      while (std::getline(a, aline)) {
        if (aline.empty()) continue;
        auto acols = split(aline, '\t');
        if (acols.size() != 4) throw Error("align: malformed line for " + utt.id);
        utt.alignment.push_back({std::stoi(acols[0]), std::stoi(acols[1]),
                                 std::stoi(acols[2]), std::stoi(acols[3])});
      }
      validate_alignment(utt);
      corpus.utts.push_back(std::move(utt));
    }
  }
  return corpus;
}

}  // namespace pmmut::corpus
