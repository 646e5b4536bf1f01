// Copyright (c) 2026 pmmut contributors
// SPDX-License-Identifier: Apache-2.0

#include "pmmut/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pmmut/ctc.hpp"
#include "pmmut/rng.hpp"

namespace pmmut {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLayerNormEps = 1e-5;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// C += A * B for row-major blocks, ikj order.
void gemm_acc(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* ai = a + static_cast<size_t>(i) * k;
    double* ci = c + static_cast<size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      const double* bp = b + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// C += A^T * B, A is m x k, B is m x n, C is k x n.
void gemm_at_b_acc(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* ai = a + static_cast<size_t>(i) * k;
    const double* bi = b + static_cast<size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      double* cp = c + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) cp[j] += av * bi[j];
    }
  }
}

// C += A * B^T, A is m x k, B is n x k, C is m x n.
void gemm_a_bt_acc(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* ai = a + static_cast<size_t>(i) * k;
    double* ci = c + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* bj = b + static_cast<size_t>(j) * k;
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += ai[p] * bj[p];
      ci[j] += acc;
    }
  }
}

void softmax_rows(const double* in, double* out, int rows, int cols) {
  for (int i = 0; i < rows; ++i) {
    const double* x = in + static_cast<size_t>(i) * cols;
    double* y = out + static_cast<size_t>(i) * cols;
    double m = kNegInf;
    for (int j = 0; j < cols; ++j) m = std::max(m, x[j]);
    double s = 0.0;
    for (int j = 0; j < cols; ++j) {
      y[j] = std::exp(x[j] - m);
      s += y[j];
    }
    const double inv = 1.0 / s;
    for (int j = 0; j < cols; ++j) y[j] *= inv;
  }
}

}  // namespace

int Graph::add_node(Node n) {
  for (int a : n.args) check_id(a);
  nodes_.push_back(std::move(n));
  evaluated_ = false;
  return static_cast<int>(nodes_.size()) - 1;
}

void Graph::check_id(int id) const {
  if (id < 0 || id >= static_cast<int>(nodes_.size())) {
    throw Error("graph: node id " + std::to_string(id) + " out of range");
  }
}

int Graph::param(const std::string& name, std::vector<int> shape) {
  Node n;
  n.kind = OpKind::kParam;
  n.name = name;
  n.shape = std::move(shape);
  return add_node(std::move(n));
}

int Graph::input(const std::string& name, std::vector<int> shape) {
  Node n;
  n.kind = OpKind::kInput;
  n.name = name;
  n.shape = std::move(shape);
  return add_node(std::move(n));
}

int Graph::constant(Tensor value) {
  Node n;
  n.kind = OpKind::kConst;
  n.shape = value.shape();
  n.const_value = std::move(value);
  return add_node(std::move(n));
}

int Graph::matmul(int a, int b) {
  check_id(a);
  check_id(b);
  const auto& sa = nodes_[static_cast<size_t>(a)].shape;
  const auto& sb = nodes_[static_cast<size_t>(b)].shape;
  Node n;
  n.kind = OpKind::kMatMul;
  n.args = {a, b};
  if (sa.size() == 2 && sb.size() == 2) {
    if (sa[1] != sb[0]) throw Error("matmul: inner dims differ");
    n.shape = {sa[0], sb[1]};
  } else if (sa.size() == 3 && sb.size() == 2) {
    if (sa[2] != sb[0]) throw Error("matmul: inner dims differ");
    n.shape = {sa[0], sa[1], sb[1]};
  } else if (sa.size() == 3 && sb.size() == 3) {
    if (sa[0] != sb[0] || sa[2] != sb[1]) throw Error("matmul: batched shape mismatch");
    n.shape = {sa[0], sa[1], sb[2]};
  } else {
    throw Error("matmul: unsupported ranks");
  }
  return add_node(std::move(n));
}

int Graph::add(int a, int b) {
  check_id(a);
  check_id(b);
  if (nodes_[static_cast<size_t>(a)].shape != nodes_[static_cast<size_t>(b)].shape) {
    throw Error("add: shape mismatch");
  }
  Node n;
  n.kind = OpKind::kAdd;
  n.args = {a, b};
  n.shape = nodes_[static_cast<size_t>(a)].shape;
  return add_node(std::move(n));
}

int Graph::mul(int a, int b) {
  check_id(a);
  check_id(b);
  if (nodes_[static_cast<size_t>(a)].shape != nodes_[static_cast<size_t>(b)].shape) {
    throw Error("mul: shape mismatch");
  }
  Node n;
  n.kind = OpKind::kMul;
  n.args = {a, b};
  n.shape = nodes_[static_cast<size_t>(a)].shape;
  return add_node(std::move(n));
}

int Graph::bias_add(int x, int bias) {
  check_id(x);
  check_id(bias);
  const auto& sx = nodes_[static_cast<size_t>(x)].shape;
  const auto& sb = nodes_[static_cast<size_t>(bias)].shape;
  if (sb.size() != 1 || sb[0] != sx.back()) {
    throw Error("bias_add: bias must match last axis");
  }
  Node n;
  n.kind = OpKind::kBiasAdd;
  n.args = {x, bias};
  n.shape = sx;
  return add_node(std::move(n));
}

int Graph::scale(int x, double c) {
  check_id(x);
  Node n;
  n.kind = OpKind::kScale;
  n.args = {x};
  n.scale = c;
  n.shape = nodes_[static_cast<size_t>(x)].shape;
  return add_node(std::move(n));
}

int Graph::swish(int x) {
  check_id(x);
  Node n;
  n.kind = OpKind::kSwish;
  n.args = {x};
  n.shape = nodes_[static_cast<size_t>(x)].shape;
  return add_node(std::move(n));
}

int Graph::relu(int x) {
  check_id(x);
  Node n;
  n.kind = OpKind::kRelu;
  n.args = {x};
  n.shape = nodes_[static_cast<size_t>(x)].shape;
  return add_node(std::move(n));
}

int Graph::layer_norm(int x, int gamma, int beta) {
  check_id(x);
  check_id(gamma);
  check_id(beta);
  const auto& sx = nodes_[static_cast<size_t>(x)].shape;
  const auto& sg = nodes_[static_cast<size_t>(gamma)].shape;
  const auto& sb = nodes_[static_cast<size_t>(beta)].shape;
  if (sg.size() != 1 || sb.size() != 1 || sg[0] != sx.back() || sb[0] != sx.back()) {
    throw Error("layer_norm: gamma/beta must match last axis");
  }
  Node n;
  n.kind = OpKind::kLayerNorm;
  n.args = {x, gamma, beta};
  n.shape = sx;
  return add_node(std::move(n));
}

int Graph::softmax(int x) {
  check_id(x);
  Node n;
  n.kind = OpKind::kSoftmax;
  n.args = {x};
  n.shape = nodes_[static_cast<size_t>(x)].shape;
  return add_node(std::move(n));
}

int Graph::log_softmax(int x) {
  check_id(x);
  Node n;
  n.kind = OpKind::kLogSoftmax;
  n.args = {x};
  n.shape = nodes_[static_cast<size_t>(x)].shape;
  return add_node(std::move(n));
}

int Graph::attention(int q, int k, int v, int heads, bool causal) {
  check_id(q);
  check_id(k);
  check_id(v);
  const auto& sq = nodes_[static_cast<size_t>(q)].shape;
  const auto& sk = nodes_[static_cast<size_t>(k)].shape;
  const auto& sv = nodes_[static_cast<size_t>(v)].shape;
  if (sq.size() != 2 || sk.size() != 2 || sv.size() != 2) {
    throw Error("attention: q/k/v must be 2-D");
  }
  if (sq[1] != sk[1] || sk != sv) throw Error("attention: q/k/v width mismatch");
  if (heads <= 0 || sq[1] % heads != 0) throw Error("attention: heads must divide width");
  if (causal && sq[0] != sk[0]) throw Error("attention: causal needs equal lengths");
  Node n;
  n.kind = OpKind::kAttention;
  n.args = {q, k, v};
  n.heads = heads;
  n.causal = causal;
  n.shape = sq;
  return add_node(std::move(n));
}

int Graph::depthwise_conv1d(int x, int w) {
  check_id(x);
  check_id(w);
  const auto& sx = nodes_[static_cast<size_t>(x)].shape;
  const auto& sw = nodes_[static_cast<size_t>(w)].shape;
  if (sx.size() != 2 || sw.size() != 2) throw Error("depthwise_conv1d: expects 2-D x and w");
  if (sw[1] != sx[1]) throw Error("depthwise_conv1d: channel mismatch");
  if (sw[0] % 2 == 0) throw Error("depthwise_conv1d: kernel must be odd");
  Node n;
  n.kind = OpKind::kDepthwiseConv1d;
  n.args = {x, w};
  n.shape = sx;
  return add_node(std::move(n));
}

int Graph::embedding(int table, std::vector<int> ids) {
  check_id(table);
  const auto& st = nodes_[static_cast<size_t>(table)].shape;
  if (st.size() != 2) throw Error("embedding: table must be 2-D");
  if (ids.empty()) throw Error("embedding: empty id list");
  for (int id : ids) {
    if (id < 0 || id >= st[0]) throw Error("embedding: id out of range");
  }
  Node n;
  n.kind = OpKind::kEmbedding;
  n.args = {table};
  n.shape = {static_cast<int>(ids.size()), st[1]};
  n.ids = std::move(ids);
  return add_node(std::move(n));
}

int Graph::subsample(int x, int factor) {
  check_id(x);
  const auto& sx = nodes_[static_cast<size_t>(x)].shape;
  if (sx.size() != 2) throw Error("subsample: expects 2-D input");
  if (factor < 1) throw Error("subsample: factor must be >= 1");
  const int t_out = sx[0] / factor;
  if (t_out < 1) throw Error("subsample: input too short for factor");
  Node n;
  n.kind = OpKind::kSubsample;
  n.args = {x};
  n.factor = factor;
  n.shape = {t_out, sx[1] * factor};
  return add_node(std::move(n));
}

int Graph::dropout(int x, double p, uint64_t seed) {
  check_id(x);
  if (p < 0.0 || p >= 1.0) throw Error("dropout: p must be in [0,1)");
  Node n;
  n.kind = OpKind::kDropout;
  n.args = {x};
  n.prob = p;
  n.seed = seed;
  n.shape = nodes_[static_cast<size_t>(x)].shape;
  return add_node(std::move(n));
}

int Graph::sum(int x) {
  check_id(x);
  Node n;
  n.kind = OpKind::kSum;
  n.args = {x};
  n.shape = {1};
  return add_node(std::move(n));
}

int Graph::ctc_loss(int log_lattice, std::vector<int> targets) {
  check_id(log_lattice);
  const auto& s = nodes_[static_cast<size_t>(log_lattice)].shape;
  if (s.size() != 2) throw Error("ctc_loss: lattice must be 2-D");
  Node n;
  n.kind = OpKind::kCtcLoss;
  n.args = {log_lattice};
  n.ids = std::move(targets);
  n.shape = {1};
  return add_node(std::move(n));
}

int Graph::cross_entropy(int log_probs, std::vector<int> targets, double smoothing) {
  check_id(log_probs);
  const auto& s = nodes_[static_cast<size_t>(log_probs)].shape;
  if (s.size() != 2) throw Error("cross_entropy: log_probs must be 2-D");
  if (static_cast<int>(targets.size()) != s[0]) {
    throw Error("cross_entropy: one target per row required");
  }
  if (smoothing < 0.0 || smoothing >= 1.0) throw Error("cross_entropy: bad smoothing");
  for (int t : targets) {
    if (t < 0 || t >= s[1]) throw Error("cross_entropy: target out of range");
  }
  Node n;
  n.kind = OpKind::kCrossEntropy;
  n.args = {log_probs};
  n.ids = std::move(targets);
  n.scale = smoothing;
  n.shape = {1};
  return add_node(std::move(n));
}

void Graph::set_loss(int node) {
  check_id(node);
  if (nodes_[static_cast<size_t>(node)].shape != std::vector<int>{1}) {
    throw Error("loss node must be scalar");
  }
  loss_ = node;
}

const Tensor& Graph::value(int id) const {
  check_id(id);
  if (!evaluated_) throw Error("graph: evaluate() has not run");
  return values_[static_cast<size_t>(id)];
}

const Tensor& Graph::gradient(int id) const {
  check_id(id);
  if (!evaluated_) throw Error("graph: evaluate() has not run");
  return grads_[static_cast<size_t>(id)];
}

void Graph::evaluate(const TensorMap& bindings) {
  values_.assign(nodes_.size(), Tensor());
  grads_.assign(nodes_.size(), Tensor());
  saved_.assign(nodes_.size(), {});

  for (size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    Tensor& out = values_[i];
    switch (n.kind) {
      case OpKind::kParam:
      case OpKind::kInput: {
        auto it = bindings.find(n.name);
        if (it == bindings.end()) throw Error("graph: leaf '" + n.name + "' unbound");
        if (it->second.shape() != n.shape) {
          throw Error("graph: leaf '" + n.name + "' bound with shape " +
                      it->second.shape_str() + ", declared " + Tensor(n.shape).shape_str());
        }
        out = it->second;
        break;
      }
      case OpKind::kConst:
        out = n.const_value;
        break;
      case OpKind::kMatMul: {
        const Tensor& a = values_[static_cast<size_t>(n.args[0])];
        const Tensor& b = values_[static_cast<size_t>(n.args[1])];
        out = Tensor(n.shape);
        if (a.rank() == 2) {
          gemm_acc(a.data(), b.data(), out.data(), a.dim(0), a.dim(1), b.dim(1));
        } else if (b.rank() == 2) {
          const int m = a.dim(1), k = a.dim(2), nn = b.dim(1);
          for (int bb = 0; bb < a.dim(0); ++bb) {
            gemm_acc(a.data() + static_cast<size_t>(bb) * m * k, b.data(),
                     out.data() + static_cast<size_t>(bb) * m * nn, m, k, nn);
          }
        } else {
          const int m = a.dim(1), k = a.dim(2), nn = b.dim(2);
          for (int bb = 0; bb < a.dim(0); ++bb) {
            gemm_acc(a.data() + static_cast<size_t>(bb) * m * k,
                     b.data() + static_cast<size_t>(bb) * k * nn,
                     out.data() + static_cast<size_t>(bb) * m * nn, m, k, nn);
          }
        }
        break;
      }
      case OpKind::kAdd: {
        const Tensor& a = values_[static_cast<size_t>(n.args[0])];
        const Tensor& b = values_[static_cast<size_t>(n.args[1])];
        out = a;
        for (size_t j = 0; j < out.numel(); ++j) out[j] += b[j];
        break;
      }
      case OpKind::kMul: {
        const Tensor& a = values_[static_cast<size_t>(n.args[0])];
        const Tensor& b = values_[static_cast<size_t>(n.args[1])];
        out = a;
        for (size_t j = 0; j < out.numel(); ++j) out[j] *= b[j];
        break;
      }
      case OpKind::kBiasAdd: {
        const Tensor& x = values_[static_cast<size_t>(n.args[0])];
        const Tensor& b = values_[static_cast<size_t>(n.args[1])];
        out = x;
        const int cols = x.last_dim();
        for (int r = 0; r < x.rows(); ++r) {
          double* row = out.data() + static_cast<size_t>(r) * cols;
          for (int j = 0; j < cols; ++j) row[j] += b[static_cast<size_t>(j)];
        }
        break;
      }
      case OpKind::kScale: {
        out = values_[static_cast<size_t>(n.args[0])];
        for (size_t j = 0; j < out.numel(); ++j) out[j] *= n.scale;
        break;
      }
      case OpKind::kSwish: {
        const Tensor& x = values_[static_cast<size_t>(n.args[0])];
        out = Tensor(n.shape);
        for (size_t j = 0; j < out.numel(); ++j) out[j] = x[j] * sigmoid(x[j]);
        break;
      }
      case OpKind::kRelu: {
        const Tensor& x = values_[static_cast<size_t>(n.args[0])];
        out = Tensor(n.shape);
        for (size_t j = 0; j < out.numel(); ++j) out[j] = x[j] > 0.0 ? x[j] : 0.0;
        break;
      }
      case OpKind::kLayerNorm: {
        const Tensor& x = values_[static_cast<size_t>(n.args[0])];
        const Tensor& gm = values_[static_cast<size_t>(n.args[1])];
        const Tensor& bt = values_[static_cast<size_t>(n.args[2])];
        out = Tensor(n.shape);
        const int cols = x.last_dim();
        const int rows = x.rows();
        Tensor xhat(n.shape);
        Tensor inv_std({rows});
        for (int r = 0; r < rows; ++r) {
          const double* xi = x.data() + static_cast<size_t>(r) * cols;
          double mean = 0.0;
          for (int j = 0; j < cols; ++j) mean += xi[j];
          mean /= cols;
          double var = 0.0;
          for (int j = 0; j < cols; ++j) var += (xi[j] - mean) * (xi[j] - mean);
          var /= cols;
          const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
          inv_std[static_cast<size_t>(r)] = inv;
          double* xh = xhat.data() + static_cast<size_t>(r) * cols;
          double* yo = out.data() + static_cast<size_t>(r) * cols;
          for (int j = 0; j < cols; ++j) {
            xh[j] = (xi[j] - mean) * inv;
            yo[j] = gm[static_cast<size_t>(j)] * xh[j] + bt[static_cast<size_t>(j)];
          }
        }
        saved_[i].push_back(std::move(xhat));
        saved_[i].push_back(std::move(inv_std));
        break;
      }
      case OpKind::kSoftmax: {
        const Tensor& x = values_[static_cast<size_t>(n.args[0])];
        out = Tensor(n.shape);
        softmax_rows(x.data(), out.data(), x.rows(), x.last_dim());
        break;
      }
      case OpKind::kLogSoftmax: {
        const Tensor& x = values_[static_cast<size_t>(n.args[0])];
        out = Tensor(n.shape);
        const int cols = x.last_dim();
        for (int r = 0; r < x.rows(); ++r) {
          const double* xi = x.data() + static_cast<size_t>(r) * cols;
          double* yo = out.data() + static_cast<size_t>(r) * cols;
          double m = kNegInf;
          for (int j = 0; j < cols; ++j) m = std::max(m, xi[j]);
          double s = 0.0;
          for (int j = 0; j < cols; ++j) s += std::exp(xi[j] - m);
          const double lse = m + std::log(s);
          for (int j = 0; j < cols; ++j) yo[j] = xi[j] - lse;
        }
        break;
      }
      case OpKind::kAttention: {
        const Tensor& q = values_[static_cast<size_t>(n.args[0])];
        const Tensor& k = values_[static_cast<size_t>(n.args[1])];
        const Tensor& v = values_[static_cast<size_t>(n.args[2])];
        const int tq = q.dim(0), tk = k.dim(0), d = q.dim(1);
        const int dh = d / n.heads;
        const double sc = 1.0 / std::sqrt(static_cast<double>(dh));
        out = Tensor(n.shape);
        for (int h = 0; h < n.heads; ++h) {
          const int off = h * dh;
          Tensor scores({tq, tk});
          for (int iq = 0; iq < tq; ++iq) {
            for (int jk = 0; jk < tk; ++jk) {
              if (n.causal && jk > iq) {
                scores.at(iq, jk) = kNegInf;
                continue;
              }
              double acc = 0.0;
              for (int c = 0; c < dh; ++c) acc += q.at(iq, off + c) * k.at(jk, off + c);
              scores.at(iq, jk) = acc * sc;
            }
          }
          Tensor attn({tq, tk});
          softmax_rows(scores.data(), attn.data(), tq, tk);
          for (int iq = 0; iq < tq; ++iq) {
            for (int c = 0; c < dh; ++c) {
              double acc = 0.0;
              for (int jk = 0; jk < tk; ++jk) acc += attn.at(iq, jk) * v.at(jk, off + c);
              out.at(iq, off + c) = acc;
            }
          }
          saved_[i].push_back(std::move(attn));
        }
        break;
      }
      case OpKind::kDepthwiseConv1d: {
        const Tensor& x = values_[static_cast<size_t>(n.args[0])];
        const Tensor& w = values_[static_cast<size_t>(n.args[1])];
        const int t_len = x.dim(0), ch = x.dim(1), k = w.dim(0);
        const int half = k / 2;
        out = Tensor(n.shape);
        for (int t = 0; t < t_len; ++t) {
          for (int c = 0; c < ch; ++c) {
            double acc = 0.0;
            for (int j = 0; j < k; ++j) {
              const int src = t + j - half;
              if (src < 0 || src >= t_len) continue;
              acc += w.at(j, c) * x.at(src, c);
            }
            out.at(t, c) = acc;
          }
        }
        break;
      }
      case OpKind::kEmbedding: {
        const Tensor& table = values_[static_cast<size_t>(n.args[0])];
        const int d = table.dim(1);
        out = Tensor(n.shape);
        for (size_t r = 0; r < n.ids.size(); ++r) {
          const double* src = table.data() + static_cast<size_t>(n.ids[r]) * d;
          std::copy(src, src + d, out.data() + r * static_cast<size_t>(d));
        }
        break;
      }
      case OpKind::kSubsample: {
        const Tensor& x = values_[static_cast<size_t>(n.args[0])];
        const int f = x.dim(1), s = n.factor;
        const int t_out = n.shape[0];
        out = Tensor(n.shape);
        for (int t = 0; t < t_out; ++t) {
          for (int j = 0; j < s; ++j) {
            for (int c = 0; c < f; ++c) out.at(t, j * f + c) = x.at(t * s + j, c);
          }
        }
        break;
      }
      case OpKind::kDropout: {
        const Tensor& x = values_[static_cast<size_t>(n.args[0])];
        out = Tensor(n.shape);
        Tensor mask(n.shape);
        const double keep_scale = 1.0 / (1.0 - n.prob);
        for (size_t j = 0; j < out.numel(); ++j) {
          const double m = counter_uniform(n.seed, j) >= n.prob ? keep_scale : 0.0;
          mask[j] = m;
          out[j] = x[j] * m;
        }
        saved_[i].push_back(std::move(mask));
        break;
      }
      case OpKind::kSum: {
        const Tensor& x = values_[static_cast<size_t>(n.args[0])];
        // Kahan summation; finite-difference probes divide tiny loss deltas
        // by the step, so accumulation error matters here.
        double s = 0.0, comp = 0.0;
        for (size_t j = 0; j < x.numel(); ++j) {
          const double y = x[j] - comp;
          const double t = s + y;
          comp = (t - s) - y;
          s = t;
        }
        out = Tensor::scalar(s);
        break;
      }
      case OpKind::kCtcLoss: {
        const Tensor& lattice = values_[static_cast<size_t>(n.args[0])];
        ctc::CtcProblem prob;
        prob.log_probs = &lattice;
        prob.targets = n.ids;
        ctc::CtcResult r = ctc::ctc_loss(prob);
        out = Tensor::scalar(r.nll);
        saved_[i].push_back(std::move(r.grad));
        break;
      }
      case OpKind::kCrossEntropy: {
        const Tensor& lp = values_[static_cast<size_t>(n.args[0])];
        const int vocab = lp.dim(1);
        const double eps = n.scale;
        const double off = vocab > 1 ? eps / (vocab - 1) : 0.0;
        double loss = 0.0;
        for (int r = 0; r < lp.dim(0); ++r) {
          const int tgt = n.ids[static_cast<size_t>(r)];
          for (int j = 0; j < vocab; ++j) {
            loss -= (j == tgt ? 1.0 - eps : off) * lp.at(r, j);
          }
        }
        out = Tensor::scalar(loss);
        break;
      }
    }
    if (!out.all_finite()) {
      throw Error("graph: non-finite output at node " + std::to_string(i) +
                  " (op " + std::to_string(static_cast<int>(n.kind)) + ")");
    }
  }
  evaluated_ = true;
}

void Graph::backward() {
  if (!evaluated_) throw Error("graph: backward before evaluate");
  if (loss_ < 0) throw Error("graph: no loss node set");

  for (size_t i = 0; i < nodes_.size(); ++i) grads_[i] = Tensor(nodes_[i].shape);
  grads_[static_cast<size_t>(loss_)][0] = 1.0;

  for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
    const Node& n = nodes_[static_cast<size_t>(id)];
    const Tensor& g = grads_[static_cast<size_t>(id)];
    switch (n.kind) {
      case OpKind::kParam:
      case OpKind::kInput:
      case OpKind::kConst:
        break;
      case OpKind::kMatMul: {
        const Tensor& a = values_[static_cast<size_t>(n.args[0])];
        const Tensor& b = values_[static_cast<size_t>(n.args[1])];
        Tensor& ga = grads_[static_cast<size_t>(n.args[0])];
        Tensor& gb = grads_[static_cast<size_t>(n.args[1])];
        if (a.rank() == 2) {
          gemm_a_bt_acc(g.data(), b.data(), ga.data(), a.dim(0), b.dim(1), a.dim(1));
          gemm_at_b_acc(a.data(), g.data(), gb.data(), a.dim(0), a.dim(1), b.dim(1));
        } else if (b.rank() == 2) {
          const int m = a.dim(1), k = a.dim(2), nn = b.dim(1);
          for (int bb = 0; bb < a.dim(0); ++bb) {
            const size_t ao = static_cast<size_t>(bb) * m * k;
            const size_t go = static_cast<size_t>(bb) * m * nn;
            gemm_a_bt_acc(g.data() + go, b.data(), ga.data() + ao, m, nn, k);
            gemm_at_b_acc(a.data() + ao, g.data() + go, gb.data(), m, k, nn);
          }
        } else {
          const int m = a.dim(1), k = a.dim(2), nn = b.dim(2);
          for (int bb = 0; bb < a.dim(0); ++bb) {
            const size_t ao = static_cast<size_t>(bb) * m * k;
            const size_t bo = static_cast<size_t>(bb) * k * nn;
            const size_t go = static_cast<size_t>(bb) * m * nn;
            gemm_a_bt_acc(g.data() + go, b.data() + bo, ga.data() + ao, m, nn, k);
            gemm_at_b_acc(a.data() + ao, g.data() + go, gb.data() + bo, m, k, nn);
          }
        }
        break;
      }
      case OpKind::kAdd: {
        Tensor& ga = grads_[static_cast<size_t>(n.args[0])];
        Tensor& gb = grads_[static_cast<size_t>(n.args[1])];
        for (size_t j = 0; j < g.numel(); ++j) {
          ga[j] += g[j];
          gb[j] += g[j];
        }
        break;
      }
      case OpKind::kMul: {
        const Tensor& a = values_[static_cast<size_t>(n.args[0])];
        const Tensor& b = values_[static_cast<size_t>(n.args[1])];
        Tensor& ga = grads_[static_cast<size_t>(n.args[0])];
        Tensor& gb = grads_[static_cast<size_t>(n.args[1])];
        for (size_t j = 0; j < g.numel(); ++j) {
          ga[j] += g[j] * b[j];
          gb[j] += g[j] * a[j];
        }
        break;
      }
      case OpKind::kBiasAdd: {
        Tensor& gx = grads_[static_cast<size_t>(n.args[0])];
        Tensor& gb = grads_[static_cast<size_t>(n.args[1])];
        const int cols = g.last_dim();
        for (int r = 0; r < g.rows(); ++r) {
          const double* row = g.data() + static_cast<size_t>(r) * cols;
          double* gxr = gx.data() + static_cast<size_t>(r) * cols;
          for (int j = 0; j < cols; ++j) {
            gxr[j] += row[j];
            gb[static_cast<size_t>(j)] += row[j];
          }
        }
        break;
      }
      case OpKind::kScale: {
        Tensor& gx = grads_[static_cast<size_t>(n.args[0])];
        for (size_t j = 0; j < g.numel(); ++j) gx[j] += g[j] * n.scale;
        break;
      }
      case OpKind::kSwish: {
        const Tensor& x = values_[static_cast<size_t>(n.args[0])];
        Tensor& gx = grads_[static_cast<size_t>(n.args[0])];
        for (size_t j = 0; j < g.numel(); ++j) {
          const double s = sigmoid(x[j]);
          gx[j] += g[j] * (s + x[j] * s * (1.0 - s));
        }
        break;
      }
      case OpKind::kRelu: {
        const Tensor& x = values_[static_cast<size_t>(n.args[0])];
        Tensor& gx = grads_[static_cast<size_t>(n.args[0])];
        for (size_t j = 0; j < g.numel(); ++j) gx[j] += x[j] > 0.0 ? g[j] : 0.0;
        break;
      }
      case OpKind::kLayerNorm: {
        const Tensor& gm = values_[static_cast<size_t>(n.args[1])];
        Tensor& gx = grads_[static_cast<size_t>(n.args[0])];
        Tensor& gg = grads_[static_cast<size_t>(n.args[1])];
        Tensor& gb = grads_[static_cast<size_t>(n.args[2])];
        const Tensor& xhat = saved_[static_cast<size_t>(id)][0];
        const Tensor& inv_std = saved_[static_cast<size_t>(id)][1];
        const int cols = g.last_dim();
        for (int r = 0; r < g.rows(); ++r) {
          const double* gr = g.data() + static_cast<size_t>(r) * cols;
          const double* xh = xhat.data() + static_cast<size_t>(r) * cols;
          double* gxr = gx.data() + static_cast<size_t>(r) * cols;
          double m1 = 0.0, m2 = 0.0;
          for (int j = 0; j < cols; ++j) {
            const double gg_j = gr[j] * gm[static_cast<size_t>(j)];
            m1 += gg_j;
            m2 += gg_j * xh[j];
            gg[static_cast<size_t>(j)] += gr[j] * xh[j];
            gb[static_cast<size_t>(j)] += gr[j];
          }
          m1 /= cols;
          m2 /= cols;
          const double inv = inv_std[static_cast<size_t>(r)];
          for (int j = 0; j < cols; ++j) {
            const double gg_j = gr[j] * gm[static_cast<size_t>(j)];
            gxr[j] += inv * (gg_j - m1 - xh[j] * m2);
          }
        }
        break;
      }
      case OpKind::kSoftmax: {
        const Tensor& y = values_[static_cast<size_t>(id)];
        Tensor& gx = grads_[static_cast<size_t>(n.args[0])];
        const int cols = g.last_dim();
        for (int r = 0; r < g.rows(); ++r) {
          const double* gr = g.data() + static_cast<size_t>(r) * cols;
          const double* yr = y.data() + static_cast<size_t>(r) * cols;
          double* gxr = gx.data() + static_cast<size_t>(r) * cols;
          double dot = 0.0;
          for (int j = 0; j < cols; ++j) dot += gr[j] * yr[j];
          for (int j = 0; j < cols; ++j) gxr[j] += yr[j] * (gr[j] - dot);
        }
        break;
      }
      case OpKind::kLogSoftmax: {
        const Tensor& y = values_[static_cast<size_t>(id)];
        Tensor& gx = grads_[static_cast<size_t>(n.args[0])];
        const int cols = g.last_dim();
        for (int r = 0; r < g.rows(); ++r) {
          const double* gr = g.data() + static_cast<size_t>(r) * cols;
          const double* yr = y.data() + static_cast<size_t>(r) * cols;
          double* gxr = gx.data() + static_cast<size_t>(r) * cols;
          double s = 0.0;
          for (int j = 0; j < cols; ++j) s += gr[j];
          for (int j = 0; j < cols; ++j) gxr[j] += gr[j] - std::exp(yr[j]) * s;
        }
        break;
      }
      case OpKind::kAttention: {
        const Tensor& q = values_[static_cast<size_t>(n.args[0])];
        const Tensor& k = values_[static_cast<size_t>(n.args[1])];
        const Tensor& v = values_[static_cast<size_t>(n.args[2])];
        Tensor& gq = grads_[static_cast<size_t>(n.args[0])];
        Tensor& gk = grads_[static_cast<size_t>(n.args[1])];
        Tensor& gv = grads_[static_cast<size_t>(n.args[2])];
        const int tq = q.dim(0), tk = k.dim(0), d = q.dim(1);
        const int dh = d / n.heads;
        const double sc = 1.0 / std::sqrt(static_cast<double>(dh));
        for (int h = 0; h < n.heads; ++h) {
          const int off = h * dh;
          const Tensor& attn = saved_[static_cast<size_t>(id)][static_cast<size_t>(h)];
          // dV, dA
          Tensor d_attn({tq, tk});
          for (int iq = 0; iq < tq; ++iq) {
            for (int jk = 0; jk < tk; ++jk) {
              double acc = 0.0;
              for (int c = 0; c < dh; ++c) acc += g.at(iq, off + c) * v.at(jk, off + c);
              d_attn.at(iq, jk) = acc;
            }
          }
          for (int jk = 0; jk < tk; ++jk) {
            for (int c = 0; c < dh; ++c) {
              double acc = 0.0;
              for (int iq = 0; iq < tq; ++iq) acc += attn.at(iq, jk) * g.at(iq, off + c);
              gv.at(jk, off + c) += acc;
            }
          }
          // dS through the row softmax (zero where attn is zero)
          Tensor d_scores({tq, tk});
          for (int iq = 0; iq < tq; ++iq) {
            double dot = 0.0;
            for (int jk = 0; jk < tk; ++jk) dot += d_attn.at(iq, jk) * attn.at(iq, jk);
            for (int jk = 0; jk < tk; ++jk) {
              d_scores.at(iq, jk) = attn.at(iq, jk) * (d_attn.at(iq, jk) - dot);
            }
          }
          for (int iq = 0; iq < tq; ++iq) {
            for (int c = 0; c < dh; ++c) {
              double acc = 0.0;
              for (int jk = 0; jk < tk; ++jk) acc += d_scores.at(iq, jk) * k.at(jk, off + c);
              gq.at(iq, off + c) += acc * sc;
            }
          }
          for (int jk = 0; jk < tk; ++jk) {
            for (int c = 0; c < dh; ++c) {
              double acc = 0.0;
              for (int iq = 0; iq < tq; ++iq) acc += d_scores.at(iq, jk) * q.at(iq, off + c);
              gk.at(jk, off + c) += acc * sc;
            }
          }
        }
        break;
      }
      case OpKind::kDepthwiseConv1d: {
        const Tensor& x = values_[static_cast<size_t>(n.args[0])];
        const Tensor& w = values_[static_cast<size_t>(n.args[1])];
        Tensor& gx = grads_[static_cast<size_t>(n.args[0])];
        Tensor& gw = grads_[static_cast<size_t>(n.args[1])];
        const int t_len = x.dim(0), ch = x.dim(1), k = w.dim(0);
        const int half = k / 2;
        for (int t = 0; t < t_len; ++t) {
          for (int c = 0; c < ch; ++c) {
            const double gtc = g.at(t, c);
            if (gtc == 0.0) continue;
            for (int j = 0; j < k; ++j) {
              const int src = t + j - half;
              if (src < 0 || src >= t_len) continue;
              gx.at(src, c) += w.at(j, c) * gtc;
              gw.at(j, c) += x.at(src, c) * gtc;
            }
          }
        }
        break;
      }
      case OpKind::kEmbedding: {
        Tensor& gt = grads_[static_cast<size_t>(n.args[0])];
        const int d = gt.dim(1);
        for (size_t r = 0; r < n.ids.size(); ++r) {
          const double* src = g.data() + r * static_cast<size_t>(d);
          double* dst = gt.data() + static_cast<size_t>(n.ids[r]) * d;
          for (int c = 0; c < d; ++c) dst[c] += src[c];
        }
        break;
      }
      case OpKind::kSubsample: {
        Tensor& gx = grads_[static_cast<size_t>(n.args[0])];
        const int f = gx.dim(1), s = n.factor;
        for (int t = 0; t < g.dim(0); ++t) {
          for (int j = 0; j < s; ++j) {
            for (int c = 0; c < f; ++c) gx.at(t * s + j, c) += g.at(t, j * f + c);
          }
        }
        break;
      }
      case OpKind::kDropout: {
        const Tensor& mask = saved_[static_cast<size_t>(id)][0];
        Tensor& gx = grads_[static_cast<size_t>(n.args[0])];
        for (size_t j = 0; j < g.numel(); ++j) gx[j] += g[j] * mask[j];
        break;
      }
      case OpKind::kSum: {
        Tensor& gx = grads_[static_cast<size_t>(n.args[0])];
        for (size_t j = 0; j < gx.numel(); ++j) gx[j] += g[0];
        break;
      }
      case OpKind::kCtcLoss: {
        const Tensor& lattice_grad = saved_[static_cast<size_t>(id)][0];
        Tensor& gx = grads_[static_cast<size_t>(n.args[0])];
        for (size_t j = 0; j < gx.numel(); ++j) gx[j] += g[0] * lattice_grad[j];
        break;
      }
      case OpKind::kCrossEntropy: {
        Tensor& gx = grads_[static_cast<size_t>(n.args[0])];
        const int vocab = gx.dim(1);
        const double eps = n.scale;
        const double off = vocab > 1 ? eps / (vocab - 1) : 0.0;
        for (int r = 0; r < gx.dim(0); ++r) {
          const int tgt = n.ids[static_cast<size_t>(r)];
          for (int j = 0; j < vocab; ++j) {
            gx.at(r, j) -= g[0] * (j == tgt ? 1.0 - eps : off);
          }
        }
        break;
      }
    }
  }
}

TensorMap Graph::parameter_gradients() const {
  if (!evaluated_) throw Error("graph: gradients before evaluate/backward");
  TensorMap out;
  for (size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].kind == OpKind::kParam) out[nodes_[i].name] = grads_[i];
  }
  return out;
}

double Graph::grad_check(const TensorMap& bindings, double step) {
  if (step <= 0.0) throw Error("grad_check: step must be positive");
  evaluate(bindings);
  backward();
  TensorMap analytic = parameter_gradients();

  TensorMap work = bindings;
  double worst = 0.0;
  for (const auto& [name, grad] : analytic) {
    Tensor& t = work.at(name);
    for (size_t j = 0; j < t.numel(); ++j) {
      const double orig = t[j];
      t[j] = orig + step;
      evaluate(work);
      const double hi = values_[static_cast<size_t>(loss_)][0];
      t[j] = orig - step;
      evaluate(work);
      const double lo = values_[static_cast<size_t>(loss_)][0];
      t[j] = orig;
      const double fd = (hi - lo) / (2.0 * step);
      const double a = grad[j];
      const double denom = std::max({std::abs(a), std::abs(fd), 1e-12});
      worst = std::max(worst, std::abs(a - fd) / denom);
    }
  }
  // leave the graph evaluated at the unperturbed point
  evaluate(bindings);
  backward();
  return worst;
}

}  // namespace pmmut
