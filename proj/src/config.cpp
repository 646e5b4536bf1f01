// Copyright (c) 2026 pmmut contributors
// SPDX-License-Identifier: Apache-2.0

#include "pmmut/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace pmmut::config {

namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

int parse_int(const std::string& v) {
  size_t used = 0;
  const int out = std::stoi(v, &used);
  if (used != v.size()) throw Error("config: bad integer '" + v + "'");
  return out;
}

double parse_double(const std::string& v) {
  size_t used = 0;
  const double out = std::stod(v, &used);
  if (used != v.size()) throw Error("config: bad number '" + v + "'");
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw Error("config: bad boolean '" + v + "'");
}

struct Entry {
  const char* key;
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

Entry int_entry(const char* key, int TrainConfig::* field) {
  return {key, [field](TrainConfig& c, const std::string& v) { c.*field = parse_int(v); },
          [field](const TrainConfig& c) { return std::to_string(c.*field); }};
}

Entry dbl_entry(const char* key, double TrainConfig::* field) {
  return {key, [field](TrainConfig& c, const std::string& v) { c.*field = parse_double(v); },
          [field](const TrainConfig& c) { return fmt_double(c.*field); }};
}

Entry bool_entry(const char* key, bool TrainConfig::* field) {
  return {key, [field](TrainConfig& c, const std::string& v) { c.*field = parse_bool(v); },
          [field](const TrainConfig& c) { return c.*field ? "true" : "false"; }};
}

Entry str_entry(const char* key, std::string TrainConfig::* field) {
  return {key, [field](TrainConfig& c, const std::string& v) { c.*field = v; },
          [field](const TrainConfig& c) { return c.*field; }};
}

const std::vector<Entry>& registry() {
  static const std::vector<Entry> entries = [] {
    std::vector<Entry> r;
    r.push_back(int_entry("corpus.n_phones", &TrainConfig::corpus_n_phones));
    r.push_back(int_entry("corpus.feat_dim", &TrainConfig::corpus_feat_dim));
    r.push_back(int_entry("corpus.n_words", &TrainConfig::corpus_n_words));
    r.push_back(int_entry("corpus.word_min_phones", &TrainConfig::corpus_word_min_phones));
    r.push_back(int_entry("corpus.word_max_phones", &TrainConfig::corpus_word_max_phones));
    r.push_back(dbl_entry("corpus.proto_margin", &TrainConfig::corpus_proto_margin));
    r.push_back(int_entry("corpus.n_train", &TrainConfig::corpus_n_train));
    r.push_back(int_entry("corpus.n_test", &TrainConfig::corpus_n_test));
    r.push_back(int_entry("corpus.min_words", &TrainConfig::corpus_min_words));
    r.push_back(int_entry("corpus.max_words", &TrainConfig::corpus_max_words));
    r.push_back(dbl_entry("corpus.noise", &TrainConfig::corpus_noise));

    r.push_back({"reduce.fraction",
                 [](TrainConfig& c, const std::string& v) { c.reduce.fraction = parse_double(v); },
                 [](const TrainConfig& c) { return fmt_double(c.reduce.fraction); }});
    r.push_back({"reduce.shrink",
                 [](TrainConfig& c, const std::string& v) { c.reduce.shrink = parse_double(v); },
                 [](const TrainConfig& c) { return fmt_double(c.reduce.shrink); }});
    r.push_back({"reduce.attenuation",
                 [](TrainConfig& c, const std::string& v) { c.reduce.attenuation = parse_double(v); },
                 [](const TrainConfig& c) { return fmt_double(c.reduce.attenuation); }});
    r.push_back({"reduce.noise",
                 [](TrainConfig& c, const std::string& v) { c.reduce.noise = parse_double(v); },
                 [](const TrainConfig& c) { return fmt_double(c.reduce.noise); }});

    r.push_back(int_entry("tokenizer.vocab", &TrainConfig::tokenizer_vocab));

    r.push_back({"model.n_total",
                 [](TrainConfig& c, const std::string& v) { c.model.n_total = parse_int(v); },
                 [](const TrainConfig& c) { return std::to_string(c.model.n_total); }});
    r.push_back({"model.n_a2p",
                 [](TrainConfig& c, const std::string& v) { c.model.n_a2p = parse_int(v); },
                 [](const TrainConfig& c) { return std::to_string(c.model.n_a2p); }});
    r.push_back({"model.d",
                 [](TrainConfig& c, const std::string& v) { c.model.d = parse_int(v); },
                 [](const TrainConfig& c) { return std::to_string(c.model.d); }});
    r.push_back({"model.heads",
                 [](TrainConfig& c, const std::string& v) { c.model.heads = parse_int(v); },
                 [](const TrainConfig& c) { return std::to_string(c.model.heads); }});
    r.push_back({"model.ffn",
                 [](TrainConfig& c, const std::string& v) { c.model.ffn = parse_int(v); },
                 [](const TrainConfig& c) { return std::to_string(c.model.ffn); }});
    r.push_back({"model.kernel",
                 [](TrainConfig& c, const std::string& v) { c.model.kernel = parse_int(v); },
                 [](const TrainConfig& c) { return std::to_string(c.model.kernel); }});
    r.push_back({"model.subsample",
                 [](TrainConfig& c, const std::string& v) { c.model.subsample = parse_int(v); },
                 [](const TrainConfig& c) { return std::to_string(c.model.subsample); }});
    r.push_back({"model.dec_layers",
                 [](TrainConfig& c, const std::string& v) { c.model.dec_layers = parse_int(v); },
                 [](const TrainConfig& c) { return std::to_string(c.model.dec_layers); }});
    r.push_back({"model.dropout",
                 [](TrainConfig& c, const std::string& v) { c.model.dropout = parse_double(v); },
                 [](const TrainConfig& c) { return fmt_double(c.model.dropout); }});
    r.push_back({"model.label_smoothing",
                 [](TrainConfig& c, const std::string& v) { c.model.label_smoothing = parse_double(v); },
                 [](const TrainConfig& c) { return fmt_double(c.model.label_smoothing); }});
    r.push_back({"model.inter_unit",
                 [](TrainConfig& c, const std::string& v) { c.model.inter_unit = model::inter_unit_from_name(v); },
                 [](const TrainConfig& c) { return model::inter_unit_name(c.model.inter_unit); }});

    r.push_back({"loss.alpha",
                 [](TrainConfig& c, const std::string& v) { c.model.alpha = parse_double(v); },
                 [](const TrainConfig& c) { return fmt_double(c.model.alpha); }});
    r.push_back({"loss.beta",
                 [](TrainConfig& c, const std::string& v) { c.model.beta = parse_double(v); },
                 [](const TrainConfig& c) { return fmt_double(c.model.beta); }});

    r.push_back(bool_entry("augment.phone_mask", &TrainConfig::aug_phone_mask));
    r.push_back(dbl_entry("augment.mask_p", &TrainConfig::aug_mask_p));
    r.push_back(bool_entry("augment.spec_augment", &TrainConfig::aug_spec_augment));
    r.push_back(int_entry("augment.time_masks", &TrainConfig::aug_time_masks));
    r.push_back(int_entry("augment.time_width", &TrainConfig::aug_time_width));
    r.push_back(int_entry("augment.feat_masks", &TrainConfig::aug_feat_masks));
    r.push_back(int_entry("augment.feat_width", &TrainConfig::aug_feat_width));
    r.push_back(bool_entry("augment.speed_perturb", &TrainConfig::aug_speed_perturb));

    r.push_back(dbl_entry("train.lr", &TrainConfig::train_lr));
    r.push_back(int_entry("train.warmup", &TrainConfig::train_warmup));
    r.push_back(dbl_entry("train.adam_beta1", &TrainConfig::train_adam_beta1));
    r.push_back(dbl_entry("train.adam_beta2", &TrainConfig::train_adam_beta2));
    r.push_back(dbl_entry("train.adam_eps", &TrainConfig::train_adam_eps));
    r.push_back(dbl_entry("train.clip", &TrainConfig::train_clip));
    r.push_back(int_entry("train.batch", &TrainConfig::train_batch));
    r.push_back(int_entry("train.epochs", &TrainConfig::train_epochs));
    r.push_back(dbl_entry("train.val_frac", &TrainConfig::train_val_frac));

    r.push_back({"decode.lambda",
                 [](TrainConfig& c, const std::string& v) { c.dec.lambda = parse_double(v); },
                 [](const TrainConfig& c) { return fmt_double(c.dec.lambda); }});
    r.push_back({"decode.beam",
                 [](TrainConfig& c, const std::string& v) { c.dec.beam = parse_int(v); },
                 [](const TrainConfig& c) { return std::to_string(c.dec.beam); }});
    r.push_back({"decode.max_len_margin",
                 [](TrainConfig& c, const std::string& v) { c.dec.max_len_margin = parse_int(v); },
                 [](const TrainConfig& c) { return std::to_string(c.dec.max_len_margin); }});
    r.push_back({"decode.eos_margin",
                 [](TrainConfig& c, const std::string& v) { c.dec.eos_margin = parse_double(v); },
                 [](const TrainConfig& c) { return fmt_double(c.dec.eos_margin); }});

    r.push_back(str_entry("ablate.systems", &TrainConfig::ablate_systems));
    r.push_back(str_entry("ablate.alphas", &TrainConfig::ablate_alphas));
    r.push_back(str_entry("ablate.n_a2p", &TrainConfig::ablate_n_a2p));
    r.push_back(int_entry("ablate.seeds", &TrainConfig::ablate_seeds));
    return r;
  }();
  return entries;
}

}  // namespace

void TrainConfig::validate() const {
  if (corpus_n_phones < 2) throw Error("config: corpus.n_phones must be >= 2");
  if (corpus_n_train < 1 || corpus_n_test < 1) throw Error("config: corpus sizes must be >= 1");
  if (corpus_min_words < 1 || corpus_max_words < corpus_min_words) {
    throw Error("config: corpus word-count range invalid");
  }
  reduce.validate();
  if (tokenizer_vocab < 5) throw Error("config: tokenizer.vocab too small");
  if (train_warmup < 1) throw Error("config: train.warmup must be >= 1");
  if (train_epochs < 1) throw Error("config: train.epochs must be >= 1");
  if (train_batch < 1) throw Error("config: train.batch must be >= 1");
  if (train_val_frac < 0.0 || train_val_frac >= 1.0) {
    throw Error("config: train.val_frac must be in [0,1)");
  }
  if (aug_mask_p < 0.0 || aug_mask_p > 1.0) throw Error("config: augment.mask_p in [0,1]");
  if (dec.lambda < 0.0 || dec.lambda > 1.0) throw Error("config: decode.lambda in [0,1]");
  if (dec.beam < 1) throw Error("config: decode.beam must be >= 1");
  if (ablate_seeds < 1) throw Error("config: ablate.seeds must be >= 1");
}

std::vector<std::string> known_keys() {
  std::vector<std::string> keys;
  for (const auto& e : registry()) keys.push_back(e.key);
  return keys;
}

void apply_override(TrainConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& e : registry()) {
    if (key == e.key) {
      e.set(cfg, value);
      return;
    }
  }
  throw Error("config: unknown key '" + key + "'");
}

TrainConfig load_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot read config file: " + path);
  TrainConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    size_t a = line.find_first_not_of(" \t\r");
    if (a == std::string::npos) continue;
    size_t b = line.find_last_not_of(" \t\r");
    line = line.substr(a, b - a + 1);
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error("config file " + path + ":" + std::to_string(lineno) + ": expected key=value");
    }
    apply_override(cfg, line.substr(0, eq), line.substr(eq + 1));
  }
  return cfg;
}

std::string dump_config(const TrainConfig& cfg) {
  std::ostringstream os;
  for (const auto& e : registry()) os << e.key << "=" << e.get(cfg) << "\n";
  return os.str();
}

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : csv) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace pmmut::config
