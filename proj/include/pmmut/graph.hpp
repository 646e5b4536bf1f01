// Copyright (c) 2026 pmmut contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pmmut/tensor.hpp"

namespace pmmut {

using TensorMap = std::map<std::string, Tensor>;

// Differentiable primitives. Every op has a forward rule and an exact
// reverse-mode gradient rule; finite-difference agreement is enforced by the
// kernel test suite.
enum class OpKind {
  kParam,
  kInput,
  kConst,
  kMatMul,
  kAdd,
  kMul,
  kBiasAdd,
  kScale,
  kSwish,
  kRelu,
  kLayerNorm,
  kSoftmax,
  kLogSoftmax,
  kAttention,
  kDepthwiseConv1d,
  kEmbedding,
  kSubsample,
  kDropout,
  kSum,
  kCtcLoss,
  kCrossEntropy,
};

// A topologically ordered list of primitive applications over leaf tensors.
// Leaves are either parameters or inputs, bound by name at evaluation time.
// Nodes are appended in construction order, so the order is already
// topological; backward walks it in exact reverse.
class Graph {
 public:
  struct Node {
    OpKind kind{};
    std::vector<int> args;     // upstream node ids
    std::vector<int> shape;    // inferred output shape
    std::string name;          // leaf name (param/input)
    // op attributes
    int heads = 0;
    bool causal = false;
    int factor = 0;            // subsample factor
    double scale = 0.0;        // kScale multiplier / kCrossEntropy smoothing
    double prob = 0.0;         // dropout probability
    uint64_t seed = 0;         // dropout seed
    std::vector<int> ids;      // embedding rows / loss targets
    Tensor const_value;        // kConst payload
  };

  // --- construction ----------------------------------------------------
  int param(const std::string& name, std::vector<int> shape);
  int input(const std::string& name, std::vector<int> shape);
  int constant(Tensor value);

  int matmul(int a, int b);
  int add(int a, int b);
  int mul(int a, int b);
  int bias_add(int x, int bias);
  int scale(int x, double c);
  int swish(int x);
  int relu(int x);
  int layer_norm(int x, int gamma, int beta);
  int softmax(int x);
  int log_softmax(int x);
  int attention(int q, int k, int v, int heads, bool causal);
  int depthwise_conv1d(int x, int w);
  int embedding(int table, std::vector<int> ids);
  int subsample(int x, int factor);
  int dropout(int x, double p, uint64_t seed);
  int sum(int x);
  int ctc_loss(int log_lattice, std::vector<int> targets);
  int cross_entropy(int log_probs, std::vector<int> targets, double smoothing);

  void set_loss(int node);
  int loss_node() const { return loss_; }

  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  const Node& node(int id) const { return nodes_[static_cast<size_t>(id)]; }
  const std::vector<int>& node_shape(int id) const {
    return nodes_[static_cast<size_t>(id)].shape;
  }

  // --- execution --------------------------------------------------------
  // Computes every node value in topological order. Throws on unbound
  // leaves, shape mismatches, and non-finite outputs. Deterministic for
  // fixed bindings and seeds.
  void evaluate(const TensorMap& bindings);

  // Reverse pass from the scalar loss node; evaluate() must have run.
  void backward();

  bool evaluated() const { return evaluated_; }
  const Tensor& value(int id) const;
  // Gradient of the loss w.r.t. a node (zero tensor when the node does not
  // influence the loss). Valid after backward().
  const Tensor& gradient(int id) const;

  // Gradients for all parameter leaves, keyed by name.
  TensorMap parameter_gradients() const;

  // Max over all parameter entries of
  // |analytic - central difference| / max(|analytic|, |difference|, 1e-12).
  double grad_check(const TensorMap& bindings, double step);

 private:
  int add_node(Node n);
  void check_id(int id) const;

  std::vector<Node> nodes_;
  std::vector<Tensor> values_;
  std::vector<Tensor> grads_;
  // per-node saved forward state needed by backward (attention weights,
  // dropout masks, ctc lattice gradients)
  std::vector<std::vector<Tensor>> saved_;
  int loss_ = -1;
  bool evaluated_ = false;
};

}  // namespace pmmut
