#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "cfr/ecmp.hpp"
#include "cfr/error.hpp"
#include "cfr/policy.hpp"
#include "cfr/rerouting.hpp"
#include "cfr/topology.hpp"
#include "cfr/traffic_matrix.hpp"

namespace cfr {

// ECMP fraction above which a flow counts as traversing a link.
inline constexpr double kTraversalThreshold = 1e-12;
inline constexpr std::uint64_t kDefaultBruteForceCap = 10000;

enum class Method { kEcmp, kPolicy, kTopK, kTopKCritical, kRandom, kBruteForce };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::kEcmp: return "ecmp";
    case Method::kPolicy: return "policy";
    case Method::kTopK: return "top_k";
    case Method::kTopKCritical: return "top_k_critical";
    case Method::kRandom: return "random";
    case Method::kBruteForce: return "brute_force";
  }
  return "unknown";
}

inline Method parse_method(const std::string& name) {
  for (Method m : {Method::kEcmp, Method::kPolicy, Method::kTopK, Method::kTopKCritical,
                   Method::kRandom, Method::kBruteForce}) {
    if (to_string(m) == name) return m;
  }
  throw DomainError("unknown method '" + name + "'");
}

struct SelectionResult {
  std::vector<int> flows;  // distinct flow ids
  Method method = Method::kEcmp;
  double u = -1.0;  // max utilization after rerouting; set by brute_force_best only
};

namespace detail {

inline void check_k(int k, int flow_count) {
  if (k < 0 || k > flow_count)
    throw DomainError("k must lie in [0, " + std::to_string(flow_count) + "]");
}

// All flow ids by descending demand, ties to the lower id.
inline std::vector<int> flows_by_demand(const TrafficMatrix& tm) {
  const int n = tm.n();
  std::vector<int> order(n * (n - 1));
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> demand(order.size());
  for (int f : order) {
    auto [s, d] = flow_of_index(f, n);
    demand[f] = tm.at(s, d);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return demand[a] > demand[b]; });
  return order;
}

}  // namespace detail

inline SelectionResult top_k(const TrafficMatrix& tm, int k) {
  const int flows = tm.n() * (tm.n() - 1);
  detail::check_k(k, flows);
  std::vector<int> order = detail::flows_by_demand(tm);
  return {std::vector<int>(order.begin(), order.begin() + k), Method::kTopK};
}

// Walks links from most to least utilized under ECMP, taking the largest
// positive-demand flows crossing each link. If the walk runs out, the
// remaining slots are filled in global Top-K order.
inline SelectionResult top_k_critical(const Topology& topo, const EcmpFractions& fr,
                                      const TrafficMatrix& tm, int k) {
  const int n = topo.node_count();
  detail::check_k(k, topo.flow_count());
  const LinkLoads loads = ecmp_link_loads(topo, tm, fr);
  std::vector<int> links(topo.link_count());
  std::iota(links.begin(), links.end(), 0);
  std::stable_sort(links.begin(), links.end(), [&](int a, int b) {
    return loads.load[a] / topo.link(a).capacity > loads.load[b] / topo.link(b).capacity;
  });

  std::vector<std::vector<int>> crossing(topo.link_count());
  for (int f : detail::flows_by_demand(tm)) {
    auto [s, d] = flow_of_index(f, n);
    if (!(tm.at(s, d) > 0.0)) continue;
    for (const auto& en : fr.entries(f)) {
      if (en.fraction > kTraversalThreshold) crossing[en.link].push_back(f);
    }
  }

  SelectionResult out{{}, Method::kTopKCritical};
  std::vector<bool> taken(topo.flow_count(), false);
  auto take = [&](int f) {
    if (static_cast<int>(out.flows.size()) < k && !taken[f]) {
      taken[f] = true;
      out.flows.push_back(f);
    }
  };
  for (int e : links) {
    for (int f : crossing[e]) take(f);
    if (static_cast<int>(out.flows.size()) == k) return out;
  }
  for (int f : detail::flows_by_demand(tm)) take(f);
  return out;
}

inline SelectionResult random_k(int flow_count, int k, std::uint64_t seed) {
  detail::check_k(k, flow_count);
  std::vector<int> ids(flow_count);
  std::iota(ids.begin(), ids.end(), 0);
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates.
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<int> pick(i, flow_count - 1);
    std::swap(ids[i], ids[pick(rng)]);
  }
  ids.resize(k);
  return {ids, Method::kRandom};
}

inline SelectionResult policy_select(const PolicyParams& params, const TrafficMatrix& tm,
                                     int k) {
  detail::check_k(k, params.shape.actions());
  return {greedy_solution(forward(params, tm), k).actions, Method::kPolicy};
}

inline std::uint64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) {
    r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
    if (r > (std::uint64_t{1} << 62)) return std::uint64_t{1} << 62;
  }
  return r;
}

// Exhaustive search over k-subsets for the lowest rerouted max utilization.
// Zero-demand flows cannot change any load, so only positive-demand flows are
// enumerated; when k exceeds their number the set is padded with the lowest
// zero-demand ids. Ties keep the lexicographically first subset.
inline SelectionResult brute_force_best(const Topology& topo, const EcmpFractions& fr,
                                        const TrafficMatrix& tm, int k,
                                        std::uint64_t cap = kDefaultBruteForceCap) {
  const int n = topo.node_count();
  detail::check_k(k, topo.flow_count());
  std::vector<int> active, idle;
  for (int f = 0; f < topo.flow_count(); ++f) {
    auto [s, d] = flow_of_index(f, n);
    (tm.at(s, d) > 0.0 ? active : idle).push_back(f);
  }
  const int na = static_cast<int>(active.size());
  SelectionResult best{{}, Method::kBruteForce};
  if (k >= na) {
    best.flows = active;
    best.flows.insert(best.flows.end(), idle.begin(), idle.begin() + (k - na));
    std::sort(best.flows.begin(), best.flows.end());
    best.u = reroute_critical_flows(topo, tm, fr, best.flows).u;
    return best;
  }
  if (binomial(na, k) > cap)
    throw DomainError("brute force needs C(" + std::to_string(na) + "," + std::to_string(k) +
                      ") subsets, above the cap of " + std::to_string(cap));
  std::vector<int> pick(k);
  std::iota(pick.begin(), pick.end(), 0);
  std::vector<int> flows(k);
  for (;;) {
    for (int i = 0; i < k; ++i) flows[i] = active[pick[i]];
    const double u = reroute_critical_flows(topo, tm, fr, flows).u;
    if (best.u < 0.0 || u < best.u - 1e-9) {
      best.u = u;
      best.flows = flows;
    }
    int i = k - 1;
    while (i >= 0 && pick[i] == na - k + i) --i;
    if (i < 0) break;
    ++pick[i];
    for (int j = i + 1; j < k; ++j) pick[j] = pick[j - 1] + 1;
  }
  return best;
}

}  // namespace cfr
