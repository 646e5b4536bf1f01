// Copyright (c) 2026 pmmut contributors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "pmmut/graph.hpp"
#include "pmmut/rng.hpp"

using namespace pmmut;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (size_t i = 0; i < t.numel(); ++i) t[i] = rng.next_gaussian() * scale;
  return t;
}

}  // namespace

TEST_CASE("matmul with identity") {
  Graph g;
  int a = g.input("a", {2, 2});
  int b = g.input("b", {2, 2});
  g.set_loss(g.sum(g.matmul(a, b)));

  Tensor eye({2, 2});
  eye.at(0, 0) = 1.0;
  eye.at(1, 1) = 1.0;
  Tensor m({2, 2});
  m.at(0, 0) = 3.5;
  m.at(0, 1) = -1.25;
  m.at(1, 0) = 0.75;
  m.at(1, 1) = 9.0;

  g.evaluate({{"a", eye}, {"b", m}});
  CHECK(g.value(2).bit_equal(m));
}

TEST_CASE("softmax of a constant row is uniform") {
  Graph g;
  int x = g.input("x", {1, 3});
  int y = g.softmax(x);
  g.set_loss(g.sum(y));
  Tensor c({1, 3});
  c.at(0, 0) = c.at(0, 1) = c.at(0, 2) = 4.2;
  g.evaluate({{"x", c}});
  for (int j = 0; j < 3; ++j) {
    CHECK(g.value(y).at(0, j) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  }
}

TEST_CASE("layernorm against scalar recomputation") {
  Graph g;
  int x = g.input("x", {1, 3});
  int gamma = g.param("gamma", {3});
  int beta = g.param("beta", {3});
  int y = g.layer_norm(x, gamma, beta);
  g.set_loss(g.sum(y));

  Tensor xv({1, 3});
  xv.at(0, 0) = 1.0;
  xv.at(0, 1) = 2.0;
  xv.at(0, 2) = 3.0;
  Tensor ones({3});
  ones[0] = ones[1] = ones[2] = 1.0;
  Tensor zeros({3});
  g.evaluate({{"x", xv}, {"gamma", ones}, {"beta", zeros}});

  // independent recomputation: mean 2, population variance 2/3
  const double mean = (1.0 + 2.0 + 3.0) / 3.0;
  double var = 0.0;
  for (double v : {1.0, 2.0, 3.0}) var += (v - mean) * (v - mean);
  var /= 3.0;
  const double inv = 1.0 / std::sqrt(var + 1e-5);
  for (int j = 0; j < 3; ++j) {
    const double expect = ((j + 1.0) - mean) * inv;
    CHECK(g.value(y).at(0, j) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("backward: sum of a parameter gives all-ones gradient") {
  Graph g;
  int p = g.param("p", {2, 3});
  g.set_loss(g.sum(p));
  Rng rng(1);
  g.evaluate({{"p", random_tensor({2, 3}, rng)}});
  g.backward();
  TensorMap grads = g.parameter_gradients();
  const Tensor& grad = grads.at("p");
  for (size_t i = 0; i < grad.numel(); ++i) CHECK(grad[i] == 1.0);
}

TEST_CASE("backward: half squared norm gives the parameter back") {
  Graph g;
  int p = g.param("p", {5});
  g.set_loss(g.scale(g.sum(g.mul(p, p)), 0.5));
  Rng rng(2);
  Tensor pv = random_tensor({5}, rng);
  g.evaluate({{"p", pv}});
  g.backward();
  TensorMap grads = g.parameter_gradients();
  const Tensor& grad = grads.at("p");
  for (size_t i = 0; i < grad.numel(); ++i) {
    CHECK(grad[i] == doctest::Approx(pv[i]).epsilon(1e-12));
  }
}

TEST_CASE("grad_check: quadratic and linear closed forms") {
  Graph g;
  int p = g.param("p", {4});
  g.set_loss(g.scale(g.sum(g.mul(p, p)), 0.5));
  Rng rng(3);
  CHECK(g.grad_check({{"p", random_tensor({4}, rng)}}, 1e-5) < 1e-8);

  Graph lin;
  int q = lin.param("q", {4});
  lin.set_loss(lin.sum(q));
  CHECK(lin.grad_check({{"q", random_tensor({4}, rng)}}, 1e-5) < 1e-10);
}

// Finite-difference agreement for every primitive, random shapes <= (4,16,32).
TEST_CASE("finite differences: elementwise and row primitives") {
  Rng shapes(11);
  for (int trial = 0; trial < 4; ++trial) {
    const int b = shapes.next_int(1, 4);
    const int t = shapes.next_int(1, 16);
    const int f = shapes.next_int(2, 32);
    Rng rng(100 + static_cast<uint64_t>(trial));
    TensorMap bind;

    Graph g;
    int x = g.param("x", {b, t, f});
    int y = g.param("y", {b, t, f});
    int bias = g.param("bias", {f});
    int gamma = g.param("gamma", {f});
    int beta = g.param("beta", {f});
    int h = g.add(x, y);
    h = g.bias_add(h, bias);
    h = g.swish(h);
    h = g.layer_norm(h, gamma, beta);
    h = g.scale(h, 0.7);
    // a direct linear term bounds every gradient entry away from zero, so
    // the relative-error metric is not dominated by FD noise on entries
    // whose true gradient is ~0
    Tensor anchor_w({b, t, f});
    for (size_t j = 0; j < anchor_w.numel(); ++j) anchor_w[j] = 5.0 + rng.next_double();
    int anchored = g.add(h, g.mul(g.add(x, y), g.constant(anchor_w)));
    g.set_loss(g.sum(anchored));

    bind["x"] = random_tensor({b, t, f}, rng);
    bind["y"] = random_tensor({b, t, f}, rng);
    bind["bias"] = random_tensor({f}, rng, 0.5);
    Tensor gm({f});
    for (int j = 0; j < f; ++j) gm[static_cast<size_t>(j)] = 1.0 + 0.1 * rng.next_gaussian();
    bind["gamma"] = gm;
    bind["beta"] = random_tensor({f}, rng, 0.1);
    CHECK(g.grad_check(bind, 1e-5) < 1e-6);
  }
}

TEST_CASE("finite differences: softmax and log_softmax rows") {
  Rng rng(15);
  for (int trial = 0; trial < 3; ++trial) {
    const int t = rng.next_int(2, 8);
    const int f = rng.next_int(2, 16);
    Graph g;
    int x = g.param("x", {t, f});
    int w = g.constant(random_tensor({t, f}, rng));
    int s = g.mul(g.softmax(x), w);
    int l = g.mul(g.log_softmax(x), w);
    g.set_loss(g.add(g.sum(s), g.sum(l)));
    CHECK(g.grad_check({{"x", random_tensor({t, f}, rng)}}, 1e-5) < 1e-6);
  }
}

TEST_CASE("finite differences: relu away from the kink") {
  Rng rng(21);
  Graph g;
  int x = g.param("x", {3, 7});
  g.set_loss(g.sum(g.relu(x)));
  Tensor xv({3, 7});
  for (size_t i = 0; i < xv.numel(); ++i) {
    double v = rng.next_gaussian();
    if (std::abs(v) < 0.05) v = v >= 0 ? 0.1 : -0.1;
    xv[i] = v;
  }
  CHECK(g.grad_check({{"x", xv}}, 1e-5) < 1e-6);
}

TEST_CASE("finite differences: matmul variants") {
  Rng rng(31);
  {
    Graph g;
    int a = g.param("a", {3, 5});
    int b = g.param("b", {5, 4});
    g.set_loss(g.sum(g.matmul(a, b)));
    CHECK(g.grad_check({{"a", random_tensor({3, 5}, rng)},
                        {"b", random_tensor({5, 4}, rng)}},
                       1e-5) < 1e-6);
  }
  {
    Graph g;
    int a = g.param("a", {2, 3, 5});
    int b = g.param("b", {5, 4});
    g.set_loss(g.sum(g.matmul(a, b)));
    CHECK(g.grad_check({{"a", random_tensor({2, 3, 5}, rng)},
                        {"b", random_tensor({5, 4}, rng)}},
                       1e-5) < 1e-6);
  }
  {
    Graph g;
    int a = g.param("a", {2, 3, 5});
    int b = g.param("b", {2, 5, 4});
    g.set_loss(g.sum(g.matmul(a, b)));
    CHECK(g.grad_check({{"a", random_tensor({2, 3, 5}, rng)},
                        {"b", random_tensor({2, 5, 4}, rng)}},
                       1e-5) < 1e-6);
  }
}

TEST_CASE("finite differences: attention single and multi head") {
  for (int heads : {1, 2}) {
    for (bool causal : {false, true}) {
      Rng rng(41 + heads + (causal ? 10 : 0));
      Graph g;
      int q = g.param("q", {5, 6});
      int k = causal ? q : g.param("k", {4, 6});
      int v = causal ? q : g.param("v", {4, 6});
      int y = g.attention(q, k, v, heads, causal);
      g.set_loss(g.sum(y));
      TensorMap bind;
      bind["q"] = random_tensor({5, 6}, rng);
      if (!causal) {
        bind["k"] = random_tensor({4, 6}, rng);
        bind["v"] = random_tensor({4, 6}, rng);
      }
      CHECK(g.grad_check(bind, 1e-5) < 1e-6);
    }
  }
}

TEST_CASE("finite differences: depthwise conv, embedding, subsample, dropout") {
  Rng rng(51);
  {
    Graph g;
    int x = g.param("x", {9, 4});
    int w = g.param("w", {3, 4});
    g.set_loss(g.sum(g.swish(g.depthwise_conv1d(x, w))));
    CHECK(g.grad_check({{"x", random_tensor({9, 4}, rng)},
                        {"w", random_tensor({3, 4}, rng)}},
                       1e-5) < 1e-6);
  }
  {
    Graph g;
    int table = g.param("table", {6, 4});
    int e = g.embedding(table, {0, 3, 3, 5});
    g.set_loss(g.sum(g.swish(e)));
    CHECK(g.grad_check({{"table", random_tensor({6, 4}, rng)}}, 1e-5) < 1e-6);
  }
  {
    Graph g;
    int x = g.param("x", {13, 3});
    g.set_loss(g.sum(g.swish(g.subsample(x, 4))));
    CHECK(g.grad_check({{"x", random_tensor({13, 3}, rng)}}, 1e-5) < 1e-6);
  }
  {
    Graph g;
    int x = g.param("x", {8, 5});
    g.set_loss(g.sum(g.dropout(x, 0.4, 777)));
    CHECK(g.grad_check({{"x", random_tensor({8, 5}, rng)}}, 1e-5) < 1e-6);
  }
}

TEST_CASE("finite differences: ctc and cross entropy through log_softmax") {
  Rng rng(61);
  {
    Graph g;
    int logits = g.param("logits", {6, 4});
    int lat = g.log_softmax(logits);
    g.set_loss(g.ctc_loss(lat, {1, 2, 1}));
    CHECK(g.grad_check({{"logits", random_tensor({6, 4}, rng)}}, 1e-5) < 1e-6);
  }
  {
    Graph g;
    int logits = g.param("logits", {5, 7});
    int lp = g.log_softmax(logits);
    g.set_loss(g.cross_entropy(lp, {1, 0, 6, 3, 3}, 0.1));
    CHECK(g.grad_check({{"logits", random_tensor({5, 7}, rng)}}, 1e-5) < 1e-6);
  }
}

TEST_CASE("softmax rows sum to one; log_softmax matches log of softmax") {
  Rng rng(71);
  for (int trial = 0; trial < 5; ++trial) {
    const int b = rng.next_int(1, 4);
    const int t = rng.next_int(1, 16);
    const int f = rng.next_int(1, 32);
    Graph g;
    int x = g.input("x", {b, t, f});
    int sm = g.softmax(x);
    int lsm = g.log_softmax(x);
    g.set_loss(g.sum(sm));
    Tensor xv = random_tensor({b, t, f}, rng, 3.0);
    g.evaluate({{"x", xv}});
    const Tensor& s = g.value(sm);
    const Tensor& ls = g.value(lsm);
    const int cols = s.last_dim();
    for (int r = 0; r < s.rows(); ++r) {
      double total = 0.0;
      for (int j = 0; j < cols; ++j) total += s.data()[r * cols + j];
      CHECK(std::abs(total - 1.0) < 1e-12);
      for (int j = 0; j < cols; ++j) {
        CHECK(std::abs(ls.data()[r * cols + j] - std::log(s.data()[r * cols + j])) < 1e-9);
      }
    }
  }
}

TEST_CASE("evaluate is pure: identical bindings give bit-identical outputs") {
  Rng rng(81);
  Graph g;
  int x = g.param("x", {6, 8});
  int w = g.param("w", {8, 8});
  int h = g.dropout(g.swish(g.matmul(x, w)), 0.3, 12345);
  g.set_loss(g.sum(h));
  TensorMap bind{{"x", random_tensor({6, 8}, rng)}, {"w", random_tensor({8, 8}, rng)}};
  g.evaluate(bind);
  Tensor first = g.value(h);
  double loss1 = g.value(g.loss_node()).scalar_value();
  g.evaluate(bind);
  CHECK(g.value(h).bit_equal(first));
  CHECK(g.value(g.loss_node()).scalar_value() == loss1);
}

TEST_CASE("error paths") {
  Graph g;
  int x = g.input("x", {2, 2});
  int y = g.softmax(x);
  CHECK_THROWS_AS(g.set_loss(y), Error);  // non-scalar loss
  g.set_loss(g.sum(y));
  CHECK_THROWS_AS(g.evaluate({}), Error);  // unbound leaf
  CHECK_THROWS_AS(g.evaluate({{"x", Tensor({3, 2})}}), Error);  // shape mismatch

  Tensor bad({2, 2});
  bad.at(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(g.evaluate({{"x", bad}}), Error);  // non-finite surfaces

  Graph g2;
  g2.input("z", {2, 2});
  CHECK_THROWS_AS(g2.backward(), Error);  // unevaluated graph

  CHECK_THROWS_AS(Graph().matmul(0, 1), Error);  // bogus ids
}

TEST_CASE("shape validation at build time") {
  Graph g;
  int a = g.input("a", {2, 3});
  int b = g.input("b", {2, 3});
  CHECK_THROWS_AS(g.matmul(a, b), Error);
  int c = g.input("c", {4});
  CHECK_THROWS_AS(g.bias_add(a, c), Error);
  CHECK_THROWS_AS(g.attention(a, a, a, 2, false), Error);  // 3 does not divide by 2
  CHECK_THROWS_AS(g.subsample(a, 5), Error);               // too short
  CHECK_THROWS_AS(g.dropout(a, 1.0, 1), Error);
}
