// Copyright (c) 2026 pmmut contributors
// SPDX-License-Identifier: Apache-2.0

#include "pmmut/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace pmmut::ctc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

inline double log_add3(double a, double b, double c) {
  return log_add(log_add(a, b), c);
}

}  // namespace

int repeats(const std::vector<int>& z) {
  int r = 0;
  for (size_t i = 1; i < z.size(); ++i) {
    if (z[i] == z[i - 1]) ++r;
  }
  return r;
}

void validate(const CtcProblem& p) {
  if (p.log_probs == nullptr || p.log_probs->rank() != 2) {
    throw Error("ctc: lattice must be a T x V matrix");
  }
  const Tensor& l = *p.log_probs;
  const int t_len = l.dim(0);
  const int vocab = l.dim(1);
  for (int t = 0; t < t_len; ++t) {
    double m = kNegInf;
    for (int v = 0; v < vocab; ++v) m = std::max(m, l.at(t, v));
    double s = 0.0;
    for (int v = 0; v < vocab; ++v) s += std::exp(l.at(t, v) - m);
    double lse = m + std::log(s);
    if (std::abs(lse) > 1e-9) {
      throw Error("ctc: lattice row " + std::to_string(t) +
                  " is not log-normalized (lse=" + std::to_string(lse) + ")");
    }
  }
  for (int z : p.targets) {
    if (z <= 0 || z >= vocab) {
      throw Error("ctc: target id " + std::to_string(z) + " outside [1, " +
                  std::to_string(vocab) + ")");
    }
  }
  const int need = static_cast<int>(p.targets.size()) + repeats(p.targets);
  if (t_len < need) {
    throw Error("ctc: infeasible target, needs T >= " + std::to_string(need) +
                " but T = " + std::to_string(t_len));
  }
}

CtcResult ctc_loss(const CtcProblem& p) {
  validate(p);
  return ctc_loss_unchecked(p);
}

CtcResult ctc_loss_unchecked(const CtcProblem& p) {
  const Tensor& l = *p.log_probs;
  const int t_len = l.dim(0);
  const int vocab = l.dim(1);
  const int u_len = static_cast<int>(p.targets.size());
  const int s_len = 2 * u_len + 1;

  // Augmented label row: blank, z0, blank, z1, ..., blank.
  std::vector<int> aug(static_cast<size_t>(s_len), kBlank);
  for (int u = 0; u < u_len; ++u) aug[static_cast<size_t>(2 * u + 1)] = p.targets[static_cast<size_t>(u)];

  auto idx = [s_len](int t, int s) { return static_cast<size_t>(t) * s_len + s; };
  std::vector<double> alpha(static_cast<size_t>(t_len) * s_len, kNegInf);
  std::vector<double> beta(static_cast<size_t>(t_len) * s_len, kNegInf);

  alpha[idx(0, 0)] = l.at(0, aug[0]);
  if (s_len > 1) alpha[idx(0, 1)] = l.at(0, aug[1]);
  for (int t = 1; t < t_len; ++t) {
    for (int s = 0; s < s_len; ++s) {
      double a = alpha[idx(t - 1, s)];
      if (s >= 1) a = log_add(a, alpha[idx(t - 1, s - 1)]);
      if (s >= 2 && aug[static_cast<size_t>(s)] != kBlank &&
          aug[static_cast<size_t>(s)] != aug[static_cast<size_t>(s - 2)]) {
        a = log_add(a, alpha[idx(t - 1, s - 2)]);
      }
      alpha[idx(t, s)] = a + l.at(t, aug[static_cast<size_t>(s)]);
    }
  }

  double log_p = alpha[idx(t_len - 1, s_len - 1)];
  if (s_len > 1) log_p = log_add(log_p, alpha[idx(t_len - 1, s_len - 2)]);

  beta[idx(t_len - 1, s_len - 1)] = l.at(t_len - 1, aug[static_cast<size_t>(s_len - 1)]);
  if (s_len > 1) {
    beta[idx(t_len - 1, s_len - 2)] = l.at(t_len - 1, aug[static_cast<size_t>(s_len - 2)]);
  }
  for (int t = t_len - 2; t >= 0; --t) {
    for (int s = s_len - 1; s >= 0; --s) {
      double b = beta[idx(t + 1, s)];
      if (s + 1 < s_len) b = log_add(b, beta[idx(t + 1, s + 1)]);
      if (s + 2 < s_len && aug[static_cast<size_t>(s + 2)] != kBlank &&
          aug[static_cast<size_t>(s + 2)] != aug[static_cast<size_t>(s)]) {
        b = log_add(b, beta[idx(t + 1, s + 2)]);
      }
      beta[idx(t, s)] = b + l.at(t, aug[static_cast<size_t>(s)]);
    }
  }

  // d(-log P)/d l[t,k] = -(1/P) sum_{s: aug[s]=k} alpha[t,s] beta[t,s] / p_t(k).
  CtcResult out;
  out.nll = -log_p;
  out.grad = Tensor({t_len, vocab});
  std::vector<double> acc(static_cast<size_t>(vocab), kNegInf);
  for (int t = 0; t < t_len; ++t) {
    std::fill(acc.begin(), acc.end(), kNegInf);
    for (int s = 0; s < s_len; ++s) {
      const int k = aug[static_cast<size_t>(s)];
      acc[static_cast<size_t>(k)] =
          log_add(acc[static_cast<size_t>(k)], alpha[idx(t, s)] + beta[idx(t, s)]);
    }
    for (int v = 0; v < vocab; ++v) {
      if (acc[static_cast<size_t>(v)] == kNegInf) continue;
      out.grad.at(t, v) = -std::exp(acc[static_cast<size_t>(v)] - l.at(t, v) - log_p);
    }
  }
  return out;
}

double ctc_brute_force(const CtcProblem& p) {
  validate(p);
  const Tensor& l = *p.log_probs;
  const int t_len = l.dim(0);
  const int vocab = l.dim(1);
  double paths = std::pow(static_cast<double>(vocab), t_len);
  if (paths > 1e7) throw Error("ctc_brute_force: instance too large");

  const long long total = static_cast<long long>(paths + 0.5);
  std::vector<int> path(static_cast<size_t>(t_len));
  std::vector<int> collapsed;
  collapsed.reserve(static_cast<size_t>(t_len));
  double sum = 0.0;
  for (long long code = 0; code < total; ++code) {
    long long c = code;
    for (int t = 0; t < t_len; ++t) {
      path[static_cast<size_t>(t)] = static_cast<int>(c % vocab);
      c /= vocab;
    }
    collapsed.clear();
    int prev = -1;
    for (int t = 0; t < t_len; ++t) {
      const int v = path[static_cast<size_t>(t)];
      if (v != prev && v != kBlank) collapsed.push_back(v);
      prev = v;
    }
    if (collapsed != p.targets) continue;
    double lp = 0.0;
    for (int t = 0; t < t_len; ++t) lp += l.at(t, path[static_cast<size_t>(t)]);
    sum += std::exp(lp);
  }
  if (sum <= 0.0) throw Error("ctc_brute_force: no feasible path");
  return -std::log(sum);
}

std::vector<int> ctc_greedy_decode(const Tensor& log_probs) {
  if (log_probs.rank() != 2) throw Error("ctc_greedy_decode: lattice must be 2-D");
  std::vector<int> out;
  int prev = -1;
  for (int t = 0; t < log_probs.dim(0); ++t) {
    int best = 0;
    for (int v = 1; v < log_probs.dim(1); ++v) {
      if (log_probs.at(t, v) > log_probs.at(t, best)) best = v;
    }
    if (best != prev && best != kBlank) out.push_back(best);
    prev = best;
  }
  return out;
}

PrefixScorer::PrefixScorer(const Tensor& log_probs)
    : log_probs_(&log_probs),
      frames_(log_probs.dim(0)),
      vocab_(log_probs.dim(1)) {
  if (log_probs.rank() != 2) throw Error("prefix scorer: lattice must be 2-D");
}

PrefixState PrefixScorer::init() const {
  PrefixState s;
  s.r_n.assign(static_cast<size_t>(frames_), kNegInf);
  s.r_b.resize(static_cast<size_t>(frames_));
  double cum = 0.0;
  for (int t = 0; t < frames_; ++t) {
    cum += log_probs_->at(t, kBlank);
    s.r_b[static_cast<size_t>(t)] = cum;
  }
  s.last_token = -1;
  s.score = s.r_b[static_cast<size_t>(frames_ - 1)];
  return s;
}

PrefixState PrefixScorer::extend(const PrefixState& s, int token) const {
  if (token <= 0 || token >= vocab_) {
    throw Error("prefix scorer: token " + std::to_string(token) + " out of range");
  }
  const Tensor& l = *log_probs_;
  PrefixState n;
  n.r_n.assign(static_cast<size_t>(frames_), kNegInf);
  n.r_b.assign(static_cast<size_t>(frames_), kNegInf);
  n.last_token = token;

  // phi[t]: prefix ends at t and may be followed by a fresh `token`;
  // a repeated token must cross a blank.
  auto phi = [&](int t) {
    double v = s.r_b[static_cast<size_t>(t)];
    if (s.last_token != token) v = log_add(v, s.r_n[static_cast<size_t>(t)]);
    return v;
  };

  double psi = kNegInf;
  if (s.last_token == -1) {
    n.r_n[0] = l.at(0, token);
    psi = n.r_n[0];
  }
  for (int t = 1; t < frames_; ++t) {
    n.r_n[static_cast<size_t>(t)] =
        log_add(n.r_n[static_cast<size_t>(t - 1)], phi(t - 1)) + l.at(t, token);
    n.r_b[static_cast<size_t>(t)] =
        log_add(n.r_b[static_cast<size_t>(t - 1)], n.r_n[static_cast<size_t>(t - 1)]) +
        l.at(t, kBlank);
    psi = log_add(psi, phi(t - 1) + l.at(t, token));
  }
  n.score = psi;
  return n;
}

double PrefixScorer::full_sequence_score(const PrefixState& s) const {
  return log_add(s.r_n[static_cast<size_t>(frames_ - 1)],
                 s.r_b[static_cast<size_t>(frames_ - 1)]);
}

}  // namespace pmmut::ctc
