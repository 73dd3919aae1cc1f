#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "cfr/error.hpp"
#include "cfr/traffic_matrix.hpp"

namespace cfr {

inline constexpr int kKernelSize = 3;
inline constexpr int kKernelArea = kKernelSize * kKernelSize;
inline constexpr double kLeakySlope = 0.01;

// Architecture: conv(3x3, stride 1, same padding, `filters`) -> leaky ReLU ->
// FC(`hidden`) -> leaky ReLU -> FC(N(N-1)) -> softmax.
struct PolicyShape {
  int nodes = 0;
  int filters = 128;
  int hidden = 128;

  int actions() const { return nodes * (nodes - 1); }
  int cells() const { return nodes * nodes; }
  int conv_outputs() const { return filters * cells(); }

  friend bool operator==(const PolicyShape&, const PolicyShape&) = default;
};

// All trainable tensors. Layouts:
//   conv_w[f][ki][kj], conv_b[f]
//   fc1_w[input][h] with input = (i * N + j) * filters + f
//   fc2_w[h][action]
struct PolicyParams {
  PolicyShape shape;
  std::vector<double> conv_w, conv_b, fc1_w, fc1_b, fc2_w, fc2_b;

  static PolicyParams zeros(const PolicyShape& s) {
    if (s.nodes < 2 || s.filters < 1 || s.hidden < 1)
      throw DomainError("invalid policy shape");
    PolicyParams p;
    p.shape = s;
    p.conv_w.assign(static_cast<size_t>(s.filters) * kKernelSize * kKernelSize, 0.0);
    p.conv_b.assign(s.filters, 0.0);
    p.fc1_w.assign(static_cast<size_t>(s.conv_outputs()) * s.hidden, 0.0);
    p.fc1_b.assign(s.hidden, 0.0);
    p.fc2_w.assign(static_cast<size_t>(s.hidden) * s.actions(), 0.0);
    p.fc2_b.assign(s.actions(), 0.0);
    return p;
  }

  // Glorot-uniform weights, zero biases.
  static PolicyParams glorot(const PolicyShape& s, std::uint64_t seed) {
    PolicyParams p = zeros(s);
    std::mt19937_64 rng(seed);
    auto fill = [&](std::vector<double>& w, double fan_in, double fan_out) {
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (double& v : w) v = dist(rng);
    };
    const double k2 = kKernelSize * kKernelSize;
    fill(p.conv_w, k2, k2 * s.filters);
    fill(p.fc1_w, s.conv_outputs(), s.hidden);
    fill(p.fc2_w, s.hidden, s.actions());
    return p;
  }

  static constexpr std::array<const char*, 6> kGroupNames = {
      "conv_w", "conv_b", "fc1_w", "fc1_b", "fc2_w", "fc2_b"};

  std::array<std::vector<double>*, 6> groups() {
    return {&conv_w, &conv_b, &fc1_w, &fc1_b, &fc2_w, &fc2_b};
  }
  std::array<const std::vector<double>*, 6> groups() const {
    return {&conv_w, &conv_b, &fc1_w, &fc1_b, &fc2_w, &fc2_b};
  }

  // this += scale * other
  PolicyParams& axpy(double scale, const PolicyParams& other) {
    if (!(shape == other.shape)) throw DomainError("policy shape mismatch");
    auto dst = groups();
    auto src = other.groups();
    for (size_t g = 0; g < dst.size(); ++g) {
      std::vector<double>& a = *dst[g];
      const std::vector<double>& b = *src[g];
      for (size_t i = 0; i < a.size(); ++i) a[i] += scale * b[i];
    }
    return *this;
  }

  bool all_finite() const {
    for (const auto* g : groups()) {
      for (double v : *g) {
        if (!std::isfinite(v)) return false;
      }
    }
    return true;
  }

  friend bool operator==(const PolicyParams&, const PolicyParams&) = default;
};

struct ActionDistribution {
  std::vector<double> logits;
  std::vector<double> probs;
};

// Ordered list of distinct action ids.
struct Solution {
  std::vector<int> actions;
  bool used_fallback = false;  // some picks were uniform over zero-prob actions
};

// Intermediate activations kept for backpropagation.
struct ForwardCache {
  std::vector<double> input;     // N*N, normalized by max demand
  std::vector<double> conv_pre;  // (i*N+j)*F+f
  std::vector<double> conv_act;
  std::vector<double> fc1_pre;
  std::vector<double> fc1_act;
  ActionDistribution dist;
};

namespace detail {

inline double leaky(double x) { return x > 0.0 ? x : kLeakySlope * x; }
inline double leaky_slope(double x) { return x > 0.0 ? 1.0 : kLeakySlope; }

inline void softmax_into(ActionDistribution& dist) {
  const double top = *std::max_element(dist.logits.begin(), dist.logits.end());
  dist.probs.resize(dist.logits.size());
  double sum = 0.0;
  for (size_t a = 0; a < dist.logits.size(); ++a) {
    dist.probs[a] = std::exp(dist.logits[a] - top);
    sum += dist.probs[a];
  }
  for (double& p : dist.probs) p /= sum;
}

}  // namespace detail

inline ForwardCache forward_cached(const PolicyParams& params, const TrafficMatrix& tm) {
  const PolicyShape& s = params.shape;
  const int n = s.nodes;
  if (tm.n() != n)
    throw DomainError("traffic matrix has " + std::to_string(tm.n()) +
                      " nodes, policy expects " + std::to_string(n));
  const int nf = s.filters;
  ForwardCache c;
  c.input.assign(s.cells(), 0.0);
  const double top = tm.max_entry();
  if (top > 0.0) {
    for (int i = 0; i < s.cells(); ++i) c.input[i] = tm.data()[i] / top;
  }

  c.conv_pre.assign(s.conv_outputs(), 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double* out = &c.conv_pre[(i * n + j) * nf];
      for (int f = 0; f < nf; ++f) out[f] = params.conv_b[f];
      for (int ki = 0; ki < kKernelSize; ++ki) {
        const int r = i + ki - 1;
        if (r < 0 || r >= n) continue;
        for (int kj = 0; kj < kKernelSize; ++kj) {
          const int col = j + kj - 1;
          if (col < 0 || col >= n) continue;
          const double x = c.input[r * n + col];
          if (x == 0.0) continue;
          const int k = ki * kKernelSize + kj;
          for (int f = 0; f < nf; ++f) out[f] += params.conv_w[f * kKernelArea + k] * x;
        }
      }
    }
  }
  c.conv_act.resize(c.conv_pre.size());
  for (size_t i = 0; i < c.conv_pre.size(); ++i) c.conv_act[i] = detail::leaky(c.conv_pre[i]);

  const int h = s.hidden;
  c.fc1_pre = params.fc1_b;
  for (int k = 0; k < s.conv_outputs(); ++k) {
    const double x = c.conv_act[k];
    const double* w = &params.fc1_w[static_cast<size_t>(k) * h];
    for (int u = 0; u < h; ++u) c.fc1_pre[u] += x * w[u];
  }
  c.fc1_act.resize(h);
  for (int u = 0; u < h; ++u) c.fc1_act[u] = detail::leaky(c.fc1_pre[u]);

  const int na = s.actions();
  c.dist.logits = params.fc2_b;
  for (int u = 0; u < h; ++u) {
    const double x = c.fc1_act[u];
    const double* w = &params.fc2_w[static_cast<size_t>(u) * na];
    for (int a = 0; a < na; ++a) c.dist.logits[a] += x * w[a];
  }
  detail::softmax_into(c.dist);
  return c;
}

inline ActionDistribution forward(const PolicyParams& params, const TrafficMatrix& tm) {
  return forward_cached(params, tm).dist;
}

// K distinct actions drawn sequentially without replacement, renormalizing
// after each draw. When the remaining mass is zero the draw is uniform over
// the remaining actions and the result is flagged.
template <typename Rng>
Solution sample_solution(const ActionDistribution& dist, int k, Rng& rng) {
  const int na = static_cast<int>(dist.probs.size());
  if (k < 1 || k > na) throw DomainError("k must lie in [1, number of actions]");
  std::vector<double> weight = dist.probs;
  std::vector<bool> taken(na, false);
  Solution sol;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < k; ++i) {
    double total = 0.0;
    for (int a = 0; a < na; ++a) {
      if (!taken[a]) total += weight[a];
    }
    int pick = -1;
    if (total > 0.0) {
      const double target = unit(rng) * total;
      double acc = 0.0;
      for (int a = 0; a < na; ++a) {
        if (taken[a] || weight[a] <= 0.0) continue;
        acc += weight[a];
        pick = a;
        if (acc > target) break;
      }
    } else {
      sol.used_fallback = true;
      std::vector<int> rest;
      for (int a = 0; a < na; ++a) {
        if (!taken[a]) rest.push_back(a);
      }
      std::uniform_int_distribution<size_t> idx(0, rest.size() - 1);
      pick = rest[idx(rng)];
    }
    taken[pick] = true;
    sol.actions.push_back(pick);
  }
  return sol;
}

inline Solution sample_solution(const ActionDistribution& dist, int k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_solution(dist, k, rng);
}

// The K most probable actions, ties to the lower action id.
inline Solution greedy_solution(const ActionDistribution& dist, int k) {
  const int na = static_cast<int>(dist.probs.size());
  if (k < 0 || k > na) throw DomainError("k must lie in [0, number of actions]");
  std::vector<int> order(na);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return dist.probs[a] > dist.probs[b]; });
  Solution sol;
  sol.actions.assign(order.begin(), order.begin() + k);
  return sol;
}

// Sum of log pi(a_i | s): the with-replacement product approximation.
inline double solution_log_prob(const ActionDistribution& dist, const Solution& sol) {
  double lp = 0.0;
  for (int a : sol.actions) {
    if (a < 0 || a >= static_cast<int>(dist.probs.size()))
      throw DomainError("action id out of range");
    if (dist.probs[a] <= 0.0) return -std::numeric_limits<double>::infinity();
    lp += std::log(dist.probs[a]);
  }
  return lp;
}

inline double entropy(const ActionDistribution& dist) {
  double h = 0.0;
  for (double p : dist.probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

namespace detail {

inline void check_finite(const std::vector<double>& v, const char* layer) {
  for (double x : v) {
    if (!std::isfinite(x)) throw Error(std::string("non-finite gradient in layer ") + layer);
  }
}

}  // namespace detail

// Adds scale * grad[advantage * log pi(sol | s) + beta * H(pi(. | s))] to
// `into`, backpropagating through the activations of `cache`.
inline void accumulate_gradients(const PolicyParams& params, const ForwardCache& cache,
                                 const Solution& sol, double advantage, double beta,
                                 double scale, PolicyParams& into) {
  const PolicyShape& s = params.shape;
  if (!(into.shape == s)) throw DomainError("policy shape mismatch");
  const int n = s.nodes, nf = s.filters, h = s.hidden, na = s.actions();

  const std::vector<double>& p = cache.dist.probs;
  const double k = static_cast<double>(sol.actions.size());
  const double ent = entropy(cache.dist);
  std::vector<double> dz(na);
  for (int a = 0; a < na; ++a) {
    dz[a] = -advantage * k * p[a];
    if (p[a] > 0.0) dz[a] -= beta * p[a] * (std::log(p[a]) + ent);
  }
  for (int a : sol.actions) dz[a] += advantage;
  detail::check_finite(dz, "softmax");

  for (int a = 0; a < na; ++a) into.fc2_b[a] += scale * dz[a];
  std::vector<double> d_fc1(h, 0.0);
  for (int u = 0; u < h; ++u) {
    const double x = scale * cache.fc1_act[u];
    double* gw = &into.fc2_w[static_cast<size_t>(u) * na];
    const double* w = &params.fc2_w[static_cast<size_t>(u) * na];
    double acc = 0.0;
    for (int a = 0; a < na; ++a) {
      gw[a] += x * dz[a];
      acc += w[a] * dz[a];
    }
    d_fc1[u] = acc * detail::leaky_slope(cache.fc1_pre[u]);
  }
  detail::check_finite(d_fc1, "fc2");

  for (int u = 0; u < h; ++u) into.fc1_b[u] += scale * d_fc1[u];
  std::vector<double> d_conv(s.conv_outputs(), 0.0);
  for (int in = 0; in < s.conv_outputs(); ++in) {
    const double x = scale * cache.conv_act[in];
    double* gw = &into.fc1_w[static_cast<size_t>(in) * h];
    const double* w = &params.fc1_w[static_cast<size_t>(in) * h];
    double acc = 0.0;
    for (int u = 0; u < h; ++u) {
      gw[u] += x * d_fc1[u];
      acc += w[u] * d_fc1[u];
    }
    d_conv[in] = acc * detail::leaky_slope(cache.conv_pre[in]);
  }
  detail::check_finite(d_conv, "fc1");

  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double* d = &d_conv[(i * n + j) * nf];
      for (int f = 0; f < nf; ++f) into.conv_b[f] += scale * d[f];
      for (int ki = 0; ki < kKernelSize; ++ki) {
        const int r = i + ki - 1;
        if (r < 0 || r >= n) continue;
        for (int kj = 0; kj < kKernelSize; ++kj) {
          const int col = j + kj - 1;
          if (col < 0 || col >= n) continue;
          const double x = scale * cache.input[r * n + col];
          if (x == 0.0) continue;
          const int kk = ki * kKernelSize + kj;
          for (int f = 0; f < nf; ++f) into.conv_w[f * kKernelArea + kk] += d[f] * x;
        }
      }
    }
  }
  detail::check_finite(into.conv_w, "conv");
}

// Ascent direction of advantage * log pi(sol | s) + beta * H(pi(. | s)).
inline PolicyParams gradients(const PolicyParams& params, const TrafficMatrix& tm,
                              const Solution& sol, double advantage, double beta) {
  PolicyParams g = PolicyParams::zeros(params.shape);
  accumulate_gradients(params, forward_cached(params, tm), sol, advantage, beta, 1.0, g);
  return g;
}

}  // namespace cfr
