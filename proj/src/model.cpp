// Copyright (c) 2026 pmmut contributors
// SPDX-License-Identifier: Apache-2.0

#include "pmmut/model.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "pmmut/ctc.hpp"
#include "pmmut/parallel.hpp"
#include "pmmut/rng.hpp"

namespace pmmut::model {

namespace {

uint64_t fnv1a64(const void* data, size_t len, uint64_t h = 0xCBF29CE484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ull;
  }
  return h;
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct ParamSpec {
  std::string name;
  std::vector<int> shape;
  double init_std;  // 0 for zero init, -1 for ones (layernorm gain)
};

void add_linear(std::vector<ParamSpec>& out, const std::string& prefix, int in, int dim,
                bool bias = true) {
  out.push_back({prefix + ".w", {in, dim}, 1.0 / std::sqrt(static_cast<double>(in))});
  if (bias) out.push_back({prefix + ".b", {dim}, 0.0});
}

void add_norm(std::vector<ParamSpec>& out, const std::string& prefix, int dim) {
  out.push_back({prefix + ".g", {dim}, -1.0});
  out.push_back({prefix + ".b", {dim}, 0.0});
}

std::vector<ParamSpec> param_specs(const ModelConfig& cfg) {
  std::vector<ParamSpec> specs;
  add_linear(specs, "front", cfg.feat_dim * cfg.subsample, cfg.d);
  for (int i = 0; i < cfg.n_total; ++i) {
    const std::string pre = "enc" + std::to_string(i);
    add_norm(specs, pre + ".ln1", cfg.d);
    for (const char* side : {".attn.q", ".attn.k", ".attn.v", ".attn.o"}) {
      // key bias is a null direction of the softmax; leave it out
      add_linear(specs, pre + side, cfg.d, cfg.d, std::string(side) != ".attn.k");
    }
    add_norm(specs, pre + ".ln2", cfg.d);
    specs.push_back({pre + ".conv.w", {cfg.kernel, cfg.d},
                     1.0 / std::sqrt(static_cast<double>(cfg.kernel))});
    add_linear(specs, pre + ".ffn.1", cfg.d, cfg.ffn);
    add_linear(specs, pre + ".ffn.2", cfg.ffn, cfg.d);
  }
  if (cfg.has_inter_head()) add_linear(specs, "head.inter", cfg.d, cfg.inter_vocab());
  add_linear(specs, "head.wp", cfg.d, cfg.v_wp);
  specs.push_back({"dec.embed", {cfg.v_wp, cfg.d}, 1.0 / std::sqrt(static_cast<double>(cfg.d))});
  for (int i = 0; i < cfg.dec_layers; ++i) {
    const std::string pre = "dec" + std::to_string(i);
    add_norm(specs, pre + ".ln1", cfg.d);
    for (const char* side : {".self.q", ".self.k", ".self.v", ".self.o"}) {
      add_linear(specs, pre + side, cfg.d, cfg.d, std::string(side) != ".self.k");
    }
    add_norm(specs, pre + ".ln2", cfg.d);
    for (const char* side : {".cross.q", ".cross.k", ".cross.v", ".cross.o"}) {
      add_linear(specs, pre + side, cfg.d, cfg.d, std::string(side) != ".cross.k");
    }
    add_norm(specs, pre + ".ln3", cfg.d);
    add_linear(specs, pre + ".ffn.1", cfg.d, cfg.ffn);
    add_linear(specs, pre + ".ffn.2", cfg.ffn, cfg.d);
  }
  add_norm(specs, "dec.ln_out", cfg.d);
  add_linear(specs, "dec.out", cfg.d, cfg.v_wp);
  return specs;
}

// Declares parameters on demand and owns dropout seeding for one graph.
struct Builder {
  Graph& g;
  const ModelConfig& cfg;
  bool train;
  Rng drop_rng;
  std::map<std::string, int> declared;

  Builder(Graph& graph, const ModelConfig& config, bool training, uint64_t seed)
      : g(graph), cfg(config), train(training), drop_rng(seed) {}

  int p(const std::string& name, std::vector<int> shape) {
    auto it = declared.find(name);
    if (it != declared.end()) return it->second;
    const int id = g.param(name, std::move(shape));
    declared.emplace(name, id);
    return id;
  }

  int dropped(int x) {
    if (!train || cfg.dropout <= 0.0) return x;
    return g.dropout(x, cfg.dropout, drop_rng.next_u64());
  }

  int linear(int x, const std::string& prefix, int in, int out) {
    return g.bias_add(g.matmul(x, p(prefix + ".w", {in, out})), p(prefix + ".b", {out}));
  }

  int linear_nobias(int x, const std::string& prefix, int in, int out) {
    return g.matmul(x, p(prefix + ".w", {in, out}));
  }

  int norm(int x, const std::string& prefix) {
    return g.layer_norm(x, p(prefix + ".g", {cfg.d}), p(prefix + ".b", {cfg.d}));
  }

  int encoder_block(int x, const std::string& pre) {
    int h = norm(x, pre + ".ln1");
    int q = linear(h, pre + ".attn.q", cfg.d, cfg.d);
    int k = linear_nobias(h, pre + ".attn.k", cfg.d, cfg.d);
    int v = linear(h, pre + ".attn.v", cfg.d, cfg.d);
    int a = g.attention(q, k, v, cfg.heads, /*causal=*/false);
    a = linear(a, pre + ".attn.o", cfg.d, cfg.d);
    x = g.add(x, dropped(a));

    h = norm(x, pre + ".ln2");
    h = g.depthwise_conv1d(h, p(pre + ".conv.w", {cfg.kernel, cfg.d}));
    h = linear(h, pre + ".ffn.1", cfg.d, cfg.ffn);
    h = g.swish(h);
    h = linear(h, pre + ".ffn.2", cfg.ffn, cfg.d);
    return g.add(x, dropped(h));
  }

  // Returns {h_plr, h_wplr, inter_lattice(-1 if none), wp_lattice}.
  struct EncoderNodes {
    int h_plr;
    int h_wplr;
    int inter_lattice;
    int wp_lattice;
  };

  EncoderNodes encoder(int feats_node) {
    const int t_out = g.node_shape(feats_node)[0] / cfg.subsample;
    int h = g.subsample(feats_node, cfg.subsample);
    h = linear(h, "front", cfg.feat_dim * cfg.subsample, cfg.d);
    h = g.add(h, g.constant(positional_encoding(t_out, cfg.d)));
    h = dropped(h);

    int h_plr = -1;
    for (int i = 0; i < cfg.n_total; ++i) {
      h = encoder_block(h, "enc" + std::to_string(i));
      if (i == cfg.n_a2p - 1) h_plr = h;
    }
    EncoderNodes nodes{};
    nodes.h_plr = h_plr;
    nodes.h_wplr = h;
    nodes.inter_lattice = -1;
    if (cfg.has_inter_head()) {
      nodes.inter_lattice =
          g.log_softmax(linear(h_plr, "head.inter", cfg.d, cfg.inter_vocab()));
    }
    nodes.wp_lattice = g.log_softmax(linear(h, "head.wp", cfg.d, cfg.v_wp));
    return nodes;
  }

  int decoder(int enc_node, const std::vector<int>& prefix) {
    if (prefix.empty()) throw Error("decoder: empty prefix");
    const int len = static_cast<int>(prefix.size());
    int e = g.embedding(p("dec.embed", {cfg.v_wp, cfg.d}), prefix);
    e = g.scale(e, std::sqrt(static_cast<double>(cfg.d)));
    e = g.add(e, g.constant(positional_encoding(len, cfg.d)));
    e = dropped(e);
    for (int i = 0; i < cfg.dec_layers; ++i) {
      const std::string pre = "dec" + std::to_string(i);
      int h = norm(e, pre + ".ln1");
      int q = linear(h, pre + ".self.q", cfg.d, cfg.d);
      int k = linear_nobias(h, pre + ".self.k", cfg.d, cfg.d);
      int v = linear(h, pre + ".self.v", cfg.d, cfg.d);
      int a = g.attention(q, k, v, cfg.heads, /*causal=*/true);
      a = linear(a, pre + ".self.o", cfg.d, cfg.d);
      e = g.add(e, dropped(a));

      h = norm(e, pre + ".ln2");
      q = linear(h, pre + ".cross.q", cfg.d, cfg.d);
      k = linear_nobias(enc_node, pre + ".cross.k", cfg.d, cfg.d);
      v = linear(enc_node, pre + ".cross.v", cfg.d, cfg.d);
      a = g.attention(q, k, v, cfg.heads, /*causal=*/false);
      a = linear(a, pre + ".cross.o", cfg.d, cfg.d);
      e = g.add(e, dropped(a));

      h = norm(e, pre + ".ln3");
      h = linear(h, pre + ".ffn.1", cfg.d, cfg.ffn);
      h = g.swish(h);
      h = linear(h, pre + ".ffn.2", cfg.ffn, cfg.d);
      e = g.add(e, dropped(h));
    }
    e = norm(e, "dec.ln_out");
    return g.log_softmax(linear(e, "dec.out", cfg.d, cfg.v_wp));
  }
};

int ctc_needed_frames(const std::vector<int>& targets) {
  return static_cast<int>(targets.size()) + ctc::repeats(targets);
}

struct LossNodes {
  int x = -1;
  int wp_nll = -1;
  int inter_nll = -1;
  int ce = -1;
  int total = -1;
};

// Full training graph for one utterance: encoder, both CTC losses, decoder
// CE, and the affine combination beta*(wp + alpha*inter) + (1-beta)*ce.
LossNodes build_loss_graph(Graph& g, const ModelConfig& cfg, const BatchItem& item,
                           bool train, uint64_t seed) {
  Builder b(g, cfg, train, seed);
  LossNodes n;
  n.x = g.input("x", item.feats.shape());
  const auto enc = b.encoder(n.x);
  n.wp_nll = g.ctc_loss(enc.wp_lattice, item.wp_targets);
  if (cfg.has_inter_head()) n.inter_nll = g.ctc_loss(enc.inter_lattice, item.inter_targets);
  const int dec = b.decoder(enc.h_wplr, item.dec_in);
  n.ce = g.cross_entropy(dec, item.dec_out, cfg.label_smoothing);

  int total = g.scale(n.wp_nll, cfg.beta);
  if (n.inter_nll >= 0) total = g.add(total, g.scale(n.inter_nll, cfg.beta * cfg.alpha));
  total = g.add(total, g.scale(n.ce, 1.0 - cfg.beta));
  n.total = total;
  g.set_loss(total);
  return n;
}

}  // namespace

std::string inter_unit_name(InterUnit u) {
  return u == InterUnit::kPhoneme ? "phoneme" : "word-piece";
}

InterUnit inter_unit_from_name(const std::string& s) {
  if (s == "phoneme") return InterUnit::kPhoneme;
  if (s == "word-piece") return InterUnit::kWordPiece;
  throw Error("unknown intermediate unit '" + s + "'");
}

void ModelConfig::validate() const {
  if (feat_dim < 1) throw Error("config: feat_dim must be >= 1");
  if (n_total < 1) throw Error("config: need at least one encoder block");
  if (n_a2p < 1 || n_a2p > n_total) throw Error("config: n_a2p must be in [1, n_total]");
  if (d < 1 || heads < 1 || d % heads != 0) throw Error("config: heads must divide d");
  if (ffn < 1) throw Error("config: ffn width must be >= 1");
  if (kernel < 1 || kernel % 2 == 0) throw Error("config: conv kernel must be odd");
  if (subsample < 1) throw Error("config: subsample must be >= 1");
  if (v_phone < 2) throw Error("config: v_phone must include blank and one phone");
  if (v_wp < 5) throw Error("config: v_wp must exceed the reserved ids");
  if (dec_layers < 1) throw Error("config: need at least one decoder layer");
  if (dropout < 0.0 || dropout >= 1.0) throw Error("config: dropout must be in [0,1)");
  if (label_smoothing < 0.0 || label_smoothing >= 1.0) {
    throw Error("config: label smoothing must be in [0,1)");
  }
  if (alpha < 0.0) throw Error("config: alpha must be >= 0");
  if (beta < 0.0 || beta > 1.0) throw Error("config: beta must be in [0,1]");
}

std::string ModelConfig::serialize() const {
  std::ostringstream os;
  os << "feat_dim=" << feat_dim << "\n";
  os << "n_total=" << n_total << "\n";
  os << "n_a2p=" << n_a2p << "\n";
  os << "d=" << d << "\n";
  os << "heads=" << heads << "\n";
  os << "ffn=" << ffn << "\n";
  os << "kernel=" << kernel << "\n";
  os << "subsample=" << subsample << "\n";
  os << "v_phone=" << v_phone << "\n";
  os << "v_wp=" << v_wp << "\n";
  os << "dec_layers=" << dec_layers << "\n";
  os << "dropout=" << fmt_double(dropout) << "\n";
  os << "label_smoothing=" << fmt_double(label_smoothing) << "\n";
  os << "alpha=" << fmt_double(alpha) << "\n";
  os << "beta=" << fmt_double(beta) << "\n";
  os << "inter_unit=" << inter_unit_name(inter_unit) << "\n";
  return os.str();
}

ModelConfig ModelConfig::deserialize(const std::string& text) {
  ModelConfig cfg;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) throw Error("checkpoint config: malformed line '" + line + "'");
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    if (key == "feat_dim") cfg.feat_dim = std::stoi(val);
    else if (key == "n_total") cfg.n_total = std::stoi(val);
    else if (key == "n_a2p") cfg.n_a2p = std::stoi(val);
    else if (key == "d") cfg.d = std::stoi(val);
    else if (key == "heads") cfg.heads = std::stoi(val);
    else if (key == "ffn") cfg.ffn = std::stoi(val);
    else if (key == "kernel") cfg.kernel = std::stoi(val);
    else if (key == "subsample") cfg.subsample = std::stoi(val);
    else if (key == "v_phone") cfg.v_phone = std::stoi(val);
    else if (key == "v_wp") cfg.v_wp = std::stoi(val);
    else if (key == "dec_layers") cfg.dec_layers = std::stoi(val);
    else if (key == "dropout") cfg.dropout = std::stod(val);
    else if (key == "label_smoothing") cfg.label_smoothing = std::stod(val);
    else if (key == "alpha") cfg.alpha = std::stod(val);
    else if (key == "beta") cfg.beta = std::stod(val);
    else if (key == "inter_unit") cfg.inter_unit = inter_unit_from_name(val);
    else throw Error("checkpoint config: unknown key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

Tensor positional_encoding(int length, int d) {
  Tensor pe({length, d});
  for (int t = 0; t < length; ++t) {
    for (int i = 0; i * 2 < d; ++i) {
      const double freq = std::pow(10000.0, -2.0 * i / d);
      pe.at(t, 2 * i) = std::sin(t * freq);
      if (2 * i + 1 < d) pe.at(t, 2 * i + 1) = std::cos(t * freq);
    }
  }
  return pe;
}

TensorMap init_params(const ModelConfig& cfg, uint64_t seed) {
  cfg.validate();
  TensorMap params;
  for (const auto& spec : param_specs(cfg)) {
    Tensor t(spec.shape);
    if (spec.init_std == -1.0) {
      for (size_t i = 0; i < t.numel(); ++i) t[i] = 1.0;
    } else if (spec.init_std > 0.0) {
      // per-tensor stream keyed by name: init order never matters
      Rng rng(Rng::derive(seed, fnv1a64(spec.name.data(), spec.name.size())));
      for (size_t i = 0; i < t.numel(); ++i) t[i] = rng.next_gaussian() * spec.init_std;
    }
    params.emplace(spec.name, std::move(t));
  }
  return params;
}

Model::Model(ModelConfig cfg, uint64_t seed)
    : cfg_(cfg), params_(init_params(cfg, seed)) {}

Model::Model(ModelConfig cfg, TensorMap params) : cfg_(cfg), params_(std::move(params)) {
  cfg_.validate();
  for (const auto& spec : param_specs(cfg_)) {
    auto it = params_.find(spec.name);
    if (it == params_.end()) throw Error("model params: missing tensor " + spec.name);
    if (it->second.shape() != spec.shape) {
      throw Error("model params: shape mismatch for " + spec.name);
    }
  }
  if (params_.size() != param_specs(cfg_).size()) {
    throw Error("model params: unexpected extra tensors");
  }
}

int Model::min_frames_for(int target_len_with_repeats) const {
  return std::max(1, target_len_with_repeats) * cfg_.subsample;
}

ForwardOutput Model::encoder_forward(const Tensor& feats, bool train, uint64_t step_seed) const {
  if (feats.rank() != 2 || feats.dim(1) != cfg_.feat_dim) {
    throw Error("encoder_forward: features must be T x feat_dim");
  }
  if (feats.dim(0) < cfg_.subsample) {
    throw Error("encoder_forward: input too short after subsampling");
  }
  Graph g;
  Builder b(g, cfg_, train, Rng::derive(step_seed, 0xE4C));
  const int x = g.input("x", feats.shape());
  const auto nodes = b.encoder(x);

  TensorMap bindings = params_;
  bindings["x"] = feats;
  g.evaluate(bindings);

  ForwardOutput out;
  out.h_plr = g.value(nodes.h_plr);
  out.h_wplr = g.value(nodes.h_wplr);
  if (nodes.inter_lattice >= 0) out.inter_lattice = g.value(nodes.inter_lattice);
  out.wp_lattice = g.value(nodes.wp_lattice);
  out.h_plr_node = nodes.h_plr;
  out.h_wplr_node = nodes.h_wplr;
  out.shared = nodes.h_plr == nodes.h_wplr;
  return out;
}

Tensor Model::decoder_forward(const Tensor& h_wplr, const std::vector<int>& prefix) const {
  if (h_wplr.rank() != 2 || h_wplr.dim(1) != cfg_.d) {
    throw Error("decoder_forward: H_WPLR must be T' x d");
  }
  Graph g;
  Builder b(g, cfg_, /*train=*/false, 0);
  const int enc = g.input("h", h_wplr.shape());
  const int out = b.decoder(enc, prefix);

  TensorMap bindings = params_;
  bindings["h"] = h_wplr;
  g.evaluate(bindings);
  return g.value(out);
}

LossResult Model::compute_loss(const std::vector<BatchItem>& batch, uint64_t step_seed,
                               int jobs) const {
  struct ItemResult {
    LossComponents comps;
    TensorMap grads;
    bool ok = false;
    std::string why;
  };
  std::vector<ItemResult> results(batch.size());

  parallel_for(static_cast<int>(batch.size()), jobs, [&](int i) {
    const BatchItem& item = batch[static_cast<size_t>(i)];
    ItemResult& res = results[static_cast<size_t>(i)];

    const int t_in = item.feats.dim(0);
    const int t_out = t_in / cfg_.subsample;
    if (t_out < 1) {
      res.why = "input shorter than one subsampled frame";
      return;
    }
    if (t_out < ctc_needed_frames(item.wp_targets)) {
      res.why = "word-piece CTC target infeasible at T'=" + std::to_string(t_out);
      return;
    }
    if (cfg_.has_inter_head() && t_out < ctc_needed_frames(item.inter_targets)) {
      res.why = "intermediate CTC target infeasible at T'=" + std::to_string(t_out);
      return;
    }

    Graph g;
    const LossNodes nodes = build_loss_graph(g, cfg_, item, /*train=*/true,
                                             Rng::derive(step_seed, static_cast<uint64_t>(i)));
    TensorMap bindings = params_;
    bindings["x"] = item.feats;
    g.evaluate(bindings);
    g.backward();

    res.comps.wp_ctc = g.value(nodes.wp_nll).scalar_value();
    res.comps.ce = g.value(nodes.ce).scalar_value();
    if (nodes.inter_nll >= 0) {
      res.comps.inter_ctc = g.value(nodes.inter_nll).scalar_value();
      res.comps.has_inter = true;
    }
    res.comps.total = g.value(nodes.total).scalar_value();
    res.grads = g.parameter_gradients();
    res.ok = true;
  });

  LossResult out;
  out.components.has_inter = cfg_.has_inter_head();
  for (size_t i = 0; i < results.size(); ++i) {
    ItemResult& res = results[i];
    if (!res.ok) {
      ++out.dropped;
      std::fprintf(stderr, "[compute_loss] dropped utterance %zu: %s\n", i, res.why.c_str());
      continue;
    }
    ++out.contributed;
    out.components.inter_ctc += res.comps.inter_ctc;
    out.components.wp_ctc += res.comps.wp_ctc;
    out.components.ce += res.comps.ce;
    out.components.total += res.comps.total;
    if (out.grads.empty()) {
      out.grads = std::move(res.grads);
    } else {
      for (auto& [name, grad] : res.grads) {
        Tensor& acc = out.grads.at(name);
        for (size_t j = 0; j < acc.numel(); ++j) acc[j] += grad[j];
      }
    }
  }
  if (out.contributed > 0) {
    const double inv = 1.0 / out.contributed;
    out.components.inter_ctc *= inv;
    out.components.wp_ctc *= inv;
    out.components.ce *= inv;
    out.components.total *= inv;
    for (auto& [name, grad] : out.grads) {
      for (size_t j = 0; j < grad.numel(); ++j) grad[j] *= inv;
    }
  }
  return out;
}

double Model::grad_check_item(const BatchItem& item, double step, uint64_t step_seed,
                              bool train) const {
  Graph g;
  build_loss_graph(g, cfg_, item, train, Rng::derive(step_seed, 0));
  TensorMap bindings = params_;
  bindings["x"] = item.feats;
  return g.grad_check(bindings, step);
}

void Model::save(const std::string& path) const {
  std::string payload;
  auto put_u64 = [&payload](uint64_t v) {
    payload.append(reinterpret_cast<const char*>(&v), 8);
  };
  const std::string cfg_text = cfg_.serialize();
  put_u64(cfg_text.size());
  payload += cfg_text;
  put_u64(params_.size());
  for (const auto& [name, t] : params_) {
    put_u64(name.size());
    payload += name;
    put_u64(static_cast<uint64_t>(t.rank()));
    for (int d : t.shape()) put_u64(static_cast<uint64_t>(d));
    payload.append(reinterpret_cast<const char*>(t.data()), t.numel() * sizeof(double));
  }
  const uint64_t checksum = fnv1a64(payload.data(), payload.size());

  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write checkpoint: " + path);
  f.write("PMCK", 4);
  f.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  f.write(reinterpret_cast<const char*>(&checksum), 8);
  if (!f) throw Error("checkpoint write failed: " + path);
}

Model Model::load(const std::string& path, const ModelConfig* expected) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot read checkpoint: " + path);
  std::string blob((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (blob.size() < 12 || blob.substr(0, 4) != "PMCK") {
    throw Error("checkpoint: bad magic in " + path);
  }
  const std::string payload = blob.substr(4, blob.size() - 12);
  uint64_t stored = 0;
  std::memcpy(&stored, blob.data() + blob.size() - 8, 8);
  if (fnv1a64(payload.data(), payload.size()) != stored) {
    throw Error("checkpoint: checksum mismatch in " + path);
  }

  size_t pos = 0;
  auto get_u64 = [&]() {
    if (pos + 8 > payload.size()) throw Error("checkpoint: truncated");
    uint64_t v = 0;
    std::memcpy(&v, payload.data() + pos, 8);
    pos += 8;
    return v;
  };
  const uint64_t cfg_len = get_u64();
  if (pos + cfg_len > payload.size()) throw Error("checkpoint: truncated config");
  ModelConfig cfg = ModelConfig::deserialize(payload.substr(pos, cfg_len));
  pos += cfg_len;

  if (expected) {
    if (expected->serialize() != cfg.serialize()) {
      throw Error("checkpoint: config mismatch (expected " + expected->serialize() +
                  "got " + cfg.serialize() + ")");
    }
  }

  TensorMap params;
  const uint64_t n_tensors = get_u64();
  for (uint64_t i = 0; i < n_tensors; ++i) {
    const uint64_t name_len = get_u64();
    if (pos + name_len > payload.size()) throw Error("checkpoint: truncated name");
    std::string name = payload.substr(pos, name_len);
    pos += name_len;
    const int rank = static_cast<int>(get_u64());
    if (rank < 1 || rank > 3) throw Error("checkpoint: bad tensor rank");
    std::vector<int> shape;
    for (int r = 0; r < rank; ++r) shape.push_back(static_cast<int>(get_u64()));
    Tensor t(shape);
    const size_t bytes = t.numel() * sizeof(double);
    if (pos + bytes > payload.size()) throw Error("checkpoint: truncated tensor data");
    std::memcpy(t.data(), payload.data() + pos, bytes);
    pos += bytes;
    params.emplace(std::move(name), std::move(t));
  }
  return Model(cfg, std::move(params));  // validates names and shapes
}

}  // namespace pmmut::model
