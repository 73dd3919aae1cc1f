#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <vector>

#include "cfr/ecmp.hpp"
#include "cfr/error.hpp"
#include "cfr/simplex.hpp"
#include "cfr/topology.hpp"
#include "cfr/traffic_matrix.hpp"

namespace cfr {

// Explicit split ratios for a set of critical flows and the resulting loads.
struct ReroutingSolution {
  std::vector<int> flows;                  // critical flow ids
  std::vector<std::vector<double>> sigma;  // sigma[k][link] for flows[k]
  double u = 0.0;                          // achieved max link utilization
  double objective = 0.0;                  // U + eps * sum(sigma)
  LinkLoads link_loads;
};

// Bounds the epsilon term by 1e-4 so it cannot outweigh U.
inline double default_epsilon(int link_count, int critical_count) {
  return 1e-4 / (static_cast<double>(link_count) * std::max(critical_count, 1));
}

// LP for rerouting `routed` flows over `background` loads. Variable 0 is U;
// variable 1 + k * M + e is sigma of routed[k] on link e. Capacity rows are
// divided by c_ij, and each flow's conservation row at its destination is
// omitted since it is implied by the others.
inline LpProblem build_rerouting_lp(const Topology& topo, const TrafficMatrix& tm,
                                    std::span<const int> routed,
                                    std::span<const double> background, double epsilon) {
  const int n = topo.node_count();
  const int m = topo.link_count();
  LpProblem lp;
  lp.add_variable(1.0, 0.0, kInfinity, "U");
  for (int f : routed) {
    auto [s, d] = flow_of_index(f, n);
    for (int e = 0; e < m; ++e) {
      const Link& l = topo.link(e);
      lp.add_variable(epsilon, 0.0, 1.0,
                      "s_" + std::to_string(s) + "_" + std::to_string(d) + "_" +
                          std::to_string(l.src) + "_" + std::to_string(l.dst));
    }
  }
  auto var = [m](int k, int e) { return 1 + k * m + e; };
  for (int e = 0; e < m; ++e) {
    const Link& l = topo.link(e);
    std::vector<LpTerm> terms;
    for (int k = 0; k < static_cast<int>(routed.size()); ++k) {
      auto [s, d] = flow_of_index(routed[k], n);
      const double demand = tm.at(s, d);
      if (demand != 0.0) terms.push_back({var(k, e), demand / l.capacity});
    }
    terms.push_back({0, -1.0});
    lp.add_row(std::move(terms), Relation::kLessEqual, -background[e] / l.capacity,
               "cap_" + std::to_string(l.src) + "_" + std::to_string(l.dst));
  }
  for (int k = 0; k < static_cast<int>(routed.size()); ++k) {
    auto [s, d] = flow_of_index(routed[k], n);
    for (int v = 0; v < n; ++v) {
      if (v == d) continue;
      std::vector<LpTerm> terms;
      for (int e : topo.in_links(v)) terms.push_back({var(k, e), 1.0});
      for (int e : topo.out_links(v)) terms.push_back({var(k, e), -1.0});
      lp.add_row(std::move(terms), Relation::kEqual, v == s ? -1.0 : 0.0,
                 "flow_" + std::to_string(s) + "_" + std::to_string(d) + "_at_" +
                     std::to_string(v));
    }
  }
  return lp;
}

namespace detail {

inline void check_flow_set(const Topology& topo, std::span<const int> flows) {
  std::vector<bool> seen(topo.flow_count(), false);
  for (int f : flows) {
    if (f < 0 || f >= topo.flow_count())
      throw DomainError("flow id out of range: " + std::to_string(f));
    if (seen[f]) throw DomainError("duplicate critical flow: " + std::to_string(f));
    seen[f] = true;
  }
}

// Zero-demand flows carry nothing, so they take their ECMP routing and are
// kept out of the LP.
inline ReroutingSolution reroute(const Topology& topo, const TrafficMatrix& tm,
                                 const EcmpFractions& fr, std::span<const int> critical,
                                 std::span<const double> background, double epsilon,
                                 const SimplexOptions& options) {
  const int n = topo.node_count();
  const int m = topo.link_count();
  if (tm.n() != n) throw DomainError("traffic matrix size does not match topology");
  if (static_cast<int>(background.size()) != m)
    throw DomainError("background load vector does not match link count");
  check_flow_set(topo, critical);

  std::vector<int> routed;
  for (int f : critical) {
    auto [s, d] = flow_of_index(f, n);
    if (tm.at(s, d) > 0.0) routed.push_back(f);
  }
  const LpProblem lp = build_rerouting_lp(topo, tm, routed, background, epsilon);
  const LpSolution lps = solve_lp(lp, options);

  ReroutingSolution out;
  out.flows.assign(critical.begin(), critical.end());
  out.sigma.assign(critical.size(), std::vector<double>(m, 0.0));
  std::vector<double> load(background.begin(), background.end());
  size_t next_routed = 0;
  for (size_t k = 0; k < critical.size(); ++k) {
    const int f = critical[k];
    auto [s, d] = flow_of_index(f, n);
    std::vector<double>& sig = out.sigma[k];
    if (next_routed < routed.size() && routed[next_routed] == f) {
      for (int e = 0; e < m; ++e) sig[e] = lps.values[1 + next_routed * m + e];
      ++next_routed;
    } else {
      for (const auto& en : fr.entries(f)) sig[en.link] = en.fraction;
    }
    const double demand = tm.at(s, d);
    for (int e = 0; e < m; ++e) load[e] += sig[e] * demand;
  }
  out.objective = lps.objective;
  out.link_loads = make_link_loads(topo, std::move(load));
  out.u = out.link_loads.max_utilization;
  return out;
}

}  // namespace detail

// Minimizes U + eps * sum(sigma) over explicit routes for `critical`, with
// every other flow contributing `background` load. eps < 0 selects
// default_epsilon.
inline ReroutingSolution solve_rerouting(const Topology& topo, const TrafficMatrix& tm,
                                         const EcmpFractions& fr,
                                         std::span<const int> critical,
                                         const LinkLoads& background, double epsilon = -1.0,
                                         const SimplexOptions& options = {}) {
  if (epsilon < 0.0)
    epsilon = default_epsilon(topo.link_count(), static_cast<int>(critical.size()));
  return detail::reroute(topo, tm, fr, critical, background.load, epsilon, options);
}

// Background = ECMP loads of every flow outside `critical`, then reroute.
inline ReroutingSolution reroute_critical_flows(const Topology& topo,
                                                const TrafficMatrix& tm,
                                                const EcmpFractions& fr,
                                                std::span<const int> critical,
                                                double epsilon = -1.0) {
  const LinkLoads background = ecmp_link_loads(topo, tm, fr, critical);
  return solve_rerouting(topo, tm, fr, critical, background, epsilon);
}

struct OptimalRouting {
  double u_opt = 0.0;
  ReroutingSolution solution;
};

// Explicit routing for all N(N-1) flows with no background load.
inline OptimalRouting solve_optimal_all_flows(const Topology& topo, const TrafficMatrix& tm,
                                              const EcmpFractions& fr,
                                              double epsilon = -1.0) {
  std::vector<int> all(topo.flow_count());
  for (int f = 0; f < topo.flow_count(); ++f) all[f] = f;
  LinkLoads zero;
  zero.load.assign(topo.link_count(), 0.0);
  OptimalRouting out;
  out.solution = solve_rerouting(topo, tm, fr, all, zero, epsilon);
  out.u_opt = out.solution.u;
  return out;
}

struct OptimalLoads {
  double u_opt = 0.0;
  LinkLoads link_loads;
};

// Same optimum U as solve_optimal_all_flows, from a smaller LP with one
// commodity per source node (any source-aggregated flow decomposes into
// per-destination flows with the same link loads). Variable 1 + k * M + e is
// the share of source k's total demand on link e.
inline OptimalLoads solve_min_max_utilization(const Topology& topo, const TrafficMatrix& tm,
                                              const SimplexOptions& options = {}) {
  const int n = topo.node_count();
  const int m = topo.link_count();
  if (tm.n() != n) throw DomainError("traffic matrix size does not match topology");
  std::vector<int> sources;
  std::vector<double> out_demand(n, 0.0);
  for (int s = 0; s < n; ++s) {
    for (int d = 0; d < n; ++d) out_demand[s] += tm.at(s, d);
    if (out_demand[s] > 0.0) sources.push_back(s);
  }
  OptimalLoads out;
  if (sources.empty()) {
    out.link_loads = make_link_loads(topo, std::vector<double>(m, 0.0));
    return out;
  }
  const int ns = static_cast<int>(sources.size());
  const double eps = 1e-4 / (static_cast<double>(m) * ns);
  LpProblem lp;
  lp.add_variable(1.0, 0.0, kInfinity, "U");
  for (int s : sources) {
    for (int e = 0; e < m; ++e)
      lp.add_variable(eps, 0.0, kInfinity,
                      "x_" + std::to_string(s) + "_" + std::to_string(topo.link(e).src) + "_" +
                          std::to_string(topo.link(e).dst));
  }
  auto var = [m](int k, int e) { return 1 + k * m + e; };
  for (int e = 0; e < m; ++e) {
    std::vector<LpTerm> terms;
    for (int k = 0; k < ns; ++k)
      terms.push_back({var(k, e), out_demand[sources[k]] / topo.link(e).capacity});
    terms.push_back({0, -1.0});
    lp.add_row(std::move(terms), Relation::kLessEqual, 0.0);
  }
  // Inflow minus outflow at every node but the source equals that node's share.
  for (int k = 0; k < ns; ++k) {
    const int s = sources[k];
    for (int v = 0; v < n; ++v) {
      if (v == s) continue;
      std::vector<LpTerm> terms;
      for (int e : topo.in_links(v)) terms.push_back({var(k, e), 1.0});
      for (int e : topo.out_links(v)) terms.push_back({var(k, e), -1.0});
      lp.add_row(std::move(terms), Relation::kEqual, tm.at(s, v) / out_demand[s]);
    }
  }
  const LpSolution sol = solve_lp(lp, options);
  std::vector<double> load(m, 0.0);
  for (int k = 0; k < ns; ++k)
    for (int e = 0; e < m; ++e) load[e] += sol.values[var(k, e)] * out_demand[sources[k]];
  out.link_loads = make_link_loads(topo, std::move(load));
  out.u_opt = out.link_loads.max_utilization;
  return out;
}

}  // namespace cfr
