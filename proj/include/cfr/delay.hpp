#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <span>
#include <utility>
#include <vector>

#include "cfr/ecmp.hpp"
#include "cfr/error.hpp"
#include "cfr/rerouting.hpp"
#include "cfr/topology.hpp"
#include "cfr/traffic_matrix.hpp"

namespace cfr {

// Omega = sum over links of l / (c - l). +infinity once any link is saturated.
inline double evaluate_delay(const Topology& topo, std::span<const double> load) {
  double omega = 0.0;
  for (int e = 0; e < topo.link_count(); ++e) {
    const double c = topo.link(e).capacity;
    if (load[e] >= c) return std::numeric_limits<double>::infinity();
    omega += load[e] / (c - load[e]);
  }
  return omega;
}

struct DelayOptimum {
  double omega_opt = 0.0;
  double gap = 0.0;  // Frank-Wolfe duality gap at the returned loads
  int iterations = 0;
  LinkLoads loads;
};

namespace detail {

// Routes every demand on one shortest path under `weight` and returns the
// aggregate link loads. Ties resolve to the lowest link index.
inline std::vector<double> all_or_nothing(const Topology& topo, const TrafficMatrix& tm,
                                          const std::vector<double>& weight) {
  const int n = topo.node_count();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> load(topo.link_count(), 0.0);
  std::vector<double> dist(n);
  std::vector<int> pred(n);
  std::vector<double> carried(n);
  std::vector<int> order;
  for (int s = 0; s < n; ++s) {
    bool any = false;
    for (int d = 0; d < n; ++d) any = any || tm.at(s, d) > 0.0;
    if (!any) continue;
    std::fill(dist.begin(), dist.end(), kInf);
    std::fill(pred.begin(), pred.end(), -1);
    using Entry = std::pair<double, int>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
    dist[s] = 0.0;
    heap.emplace(0.0, s);
    order.clear();
    while (!heap.empty()) {
      auto [dv, v] = heap.top();
      heap.pop();
      if (dv > dist[v]) continue;
      order.push_back(v);
      for (int e : topo.out_links(v)) {
        const int w = topo.link(e).dst;
        const double nd = dv + weight[e];
        if (nd < dist[w]) {
          dist[w] = nd;
          pred[w] = e;
          heap.emplace(nd, w);
        }
      }
    }
    for (int d = 0; d < n; ++d) carried[d] = tm.at(s, d);
    // Push demand toward the source along predecessor links, farthest first.
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const int v = *it;
      if (v == s || carried[v] == 0.0) continue;
      const int e = pred[v];
      load[e] += carried[v];
      carried[topo.link(e).src] += carried[v];
    }
  }
  return load;
}

}  // namespace detail

// Delay-optimal routing of all flows via Frank-Wolfe over aggregate link
// loads. Stops when the duality gap falls below tol * Omega or after
// max_iters iterations.
inline DelayOptimum solve_delay_optimal(const Topology& topo, const TrafficMatrix& tm,
                                        const EcmpFractions& fr, int max_iters = 500,
                                        double tol = 1e-5) {
  const int m = topo.link_count();
  std::vector<double> load = ecmp_link_loads(topo, tm, fr).load;
  double omega = evaluate_delay(topo, load);
  if (!std::isfinite(omega)) {
    OptimalLoads opt = solve_min_max_utilization(topo, tm);
    if (!(opt.u_opt < 1.0))
      throw Error("overloaded instance: no routing keeps every link below capacity");
    load = opt.link_loads.load;
    omega = evaluate_delay(topo, load);
  }

  DelayOptimum out;
  std::vector<double> grad(m), dir(m);
  for (int it = 0; it < max_iters; ++it) {
    for (int e = 0; e < m; ++e) {
      const double c = topo.link(e).capacity;
      grad[e] = c / ((c - load[e]) * (c - load[e]));
    }
    const std::vector<double> target = detail::all_or_nothing(topo, tm, grad);
    double gap = 0.0;
    for (int e = 0; e < m; ++e) {
      dir[e] = target[e] - load[e];
      gap -= grad[e] * dir[e];
    }
    out.gap = gap;
    out.iterations = it;
    if (gap <= tol * omega || gap <= 1e-15) break;

    // Largest step keeping every link strictly below capacity.
    double step_max = 1.0;
    for (int e = 0; e < m; ++e) {
      if (dir[e] > 0.0)
        step_max = std::min(step_max, (topo.link(e).capacity - load[e]) / dir[e]);
    }
    auto slope = [&](double step) {
      double s = 0.0;
      for (int e = 0; e < m; ++e) {
        const double c = topo.link(e).capacity;
        const double r = c - load[e] - step * dir[e];
        s += dir[e] * c / (r * r);
      }
      return s;
    };
    double lo = 0.0, hi = step_max;
    double step;
    if (step_max >= 1.0 && slope(1.0) <= 0.0) {
      step = 1.0;
    } else {
      for (int b = 0; b < 100; ++b) {
        const double mid = 0.5 * (lo + hi);
        if (slope(mid) > 0.0)
          hi = mid;
        else
          lo = mid;
      }
      step = lo;
    }
    if (step <= 0.0) break;
    for (int e = 0; e < m; ++e) load[e] += step * dir[e];
    omega = evaluate_delay(topo, load);
    out.iterations = it + 1;
  }
  out.omega_opt = omega;
  out.loads = make_link_loads(topo, std::move(load));
  return out;
}

}  // namespace cfr
