#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <queue>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cfr/error.hpp"
#include "cfr/topology.hpp"
#include "cfr/traffic_matrix.hpp"

namespace cfr {

// Two path costs closer than this are treated as equal.
inline constexpr double kCostTieTolerance = 1e-12;

// Per-link load plus the maximum utilization over all links.
struct LinkLoads {
  std::vector<double> load;
  double max_utilization = 0.0;
};

inline double max_utilization(const Topology& topo, std::span<const double> load) {
  double u = 0.0;
  for (int e = 0; e < topo.link_count(); ++e)
    u = std::max(u, load[e] / topo.link(e).capacity);
  return u;
}

inline LinkLoads make_link_loads(const Topology& topo, std::vector<double> load) {
  LinkLoads out;
  out.max_utilization = max_utilization(topo, load);
  out.load = std::move(load);
  return out;
}

// Shortest distance (by link cost) from every node to `dst`.
inline std::vector<double> distances_to(const Topology& topo, int dst) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(topo.node_count(), kInf);
  using Entry = std::pair<double, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  dist[dst] = 0.0;
  heap.emplace(0.0, dst);
  while (!heap.empty()) {
    auto [d, v] = heap.top();
    heap.pop();
    if (d > dist[v]) continue;
    for (int e : topo.in_links(v)) {
      const Link& l = topo.link(e);
      double nd = d + l.cost;
      if (nd < dist[l.src]) {
        dist[l.src] = nd;
        heap.emplace(nd, l.src);
      }
    }
  }
  return dist;
}

// ECMP split fractions for every flow on every link, using per-hop equal
// splitting across all minimum-cost next hops (OSPF semantics).
class EcmpFractions {
 public:
  struct Entry {
    int link;
    double fraction;
  };

  explicit EcmpFractions(const Topology& topo)
      : node_count_(topo.node_count()),
        link_count_(topo.link_count()),
        entries_(topo.flow_count()) {
    const int n = node_count_;
    std::vector<double> mass(n);
    std::vector<int> order(n);
    for (int dst = 0; dst < n; ++dst) {
      const std::vector<double> dist = distances_to(topo, dst);
      std::vector<std::vector<int>> next_hops(n);
      for (int v = 0; v < n; ++v) {
        if (v == dst) continue;
        for (int e : topo.out_links(v)) {
          const Link& l = topo.link(e);
          if (std::abs(dist[v] - (l.cost + dist[l.dst])) <= kCostTieTolerance)
            next_hops[v].push_back(e);
        }
      }
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](int a, int b) { return dist[a] > dist[b]; });
      for (int src = 0; src < n; ++src) {
        if (src == dst) continue;
        if (!std::isfinite(dist[src]))
          throw Error("no path from " + std::to_string(src) + " to " +
                      std::to_string(dst));
        std::fill(mass.begin(), mass.end(), 0.0);
        std::vector<double> frac(link_count_, 0.0);
        mass[src] = 1.0;
        // Every next hop is strictly closer to dst, so a single sweep in
        // decreasing distance order pushes all mass to dst.
        for (int v : order) {
          if (v == dst || mass[v] == 0.0) continue;
          const double share = mass[v] / static_cast<double>(next_hops[v].size());
          for (int e : next_hops[v]) {
            frac[e] += share;
            mass[topo.link(e).dst] += share;
          }
        }
        auto& list = entries_[flow_index(src, dst, n)];
        for (int e = 0; e < link_count_; ++e) {
          if (frac[e] != 0.0) list.push_back({e, frac[e]});
        }
      }
    }
  }

  int node_count() const { return node_count_; }
  int link_count() const { return link_count_; }

  // Non-zero (link, fraction) entries of one flow, sorted by link.
  const std::vector<Entry>& entries(int flow) const { return entries_[flow]; }

  double fraction(int flow, int link) const {
    for (const Entry& en : entries_[flow]) {
      if (en.link == link) return en.fraction;
    }
    return 0.0;
  }

 private:
  int node_count_;
  int link_count_;
  std::vector<std::vector<Entry>> entries_;
};

inline EcmpFractions compute_ecmp_fractions(const Topology& topo) {
  return EcmpFractions(topo);
}

// Loads of all flows not in `exclude` routed by ECMP.
inline LinkLoads ecmp_link_loads(const Topology& topo, const TrafficMatrix& tm,
                                 const EcmpFractions& fr,
                                 std::span<const int> exclude = {}) {
  const int n = topo.node_count();
  if (tm.n() != n) throw DomainError("traffic matrix size does not match topology");
  std::vector<bool> skip(topo.flow_count(), false);
  for (int f : exclude) {
    if (f < 0 || f >= topo.flow_count()) throw DomainError("excluded flow out of range");
    skip[f] = true;
  }
  std::vector<double> load(topo.link_count(), 0.0);
  for (int f = 0; f < topo.flow_count(); ++f) {
    if (skip[f]) continue;
    auto [s, d] = flow_of_index(f, n);
    const double demand = tm.at(s, d);
    if (demand == 0.0) continue;
    for (const auto& en : fr.entries(f)) load[en.link] += en.fraction * demand;
  }
  return make_link_loads(topo, std::move(load));
}

inline double ecmp_max_utilization(const Topology& topo, const TrafficMatrix& tm,
                                   const EcmpFractions& fr) {
  return ecmp_link_loads(topo, tm, fr).max_utilization;
}

}  // namespace cfr
