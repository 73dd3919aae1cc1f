#include <gtest/gtest.h>

#include <functional>
#include <random>
#include <set>

#include "cfr/selectors.hpp"
#include "cfr/traffic.hpp"
#include "support/oracles.hpp"

using namespace cfr;

namespace {

const std::string kData = CFR_DATA_DIR;

void expect_valid(const SelectionResult& r, int k, int flows) {
  EXPECT_EQ(static_cast<int>(r.flows.size()), k);
  std::set<int> seen(r.flows.begin(), r.flows.end());
  EXPECT_EQ(static_cast<int>(seen.size()), k);
  for (int f : r.flows) {
    EXPECT_GE(f, 0);
    EXPECT_LT(f, flows);
  }
}

// min u over every k-subset of all flows, zero-demand ones included.
double all_subsets_min(const Topology& t, const EcmpFractions& fr, const TrafficMatrix& tm,
                       int k) {
  double best = oracle::kInf;
  std::vector<int> pick;
  std::function<void(int)> rec = [&](int start) {
    if (static_cast<int>(pick.size()) == k) {
      best = std::min(best, reroute_critical_flows(t, tm, fr, pick).u);
      return;
    }
    for (int f = start; f < t.flow_count(); ++f) {
      pick.push_back(f);
      rec(f + 1);
      pick.pop_back();
    }
  };
  rec(0);
  return best;
}

}  // namespace

TEST(TopK, LargestFirst) {
  TrafficMatrix tm(3);
  tm.set(1, 2, 5);  // A
  tm.set(0, 1, 3);  // B
  tm.set(2, 0, 1);  // C
  SelectionResult r = top_k(tm, 2);
  EXPECT_EQ(r.flows, (std::vector<int>{flow_index(1, 2, 3), flow_index(0, 1, 3)}));
  EXPECT_EQ(r.method, Method::kTopK);
}

TEST(TopK, TiesToLowestIndexAndAllFlows) {
  TrafficMatrix tm(4);
  for (int s = 0; s < 4; ++s)
    for (int d = 0; d < 4; ++d)
      if (s != d) tm.set(s, d, 1.0);
  EXPECT_EQ(top_k(tm, 2).flows, (std::vector<int>{0, 1}));
  expect_valid(top_k(tm, 12), 12, 12);
  EXPECT_THROW(top_k(tm, 13), DomainError);
}

TEST(TopKCritical, TriangleSingleFlow) {
  Topology t = load_topology(kData + "/triangle3.topo");
  TrafficMatrix tm(3);
  tm.set(0, 2, 0.9);
  EXPECT_EQ(top_k_critical(t, EcmpFractions(t), tm, 1).flows,
            std::vector<int>{flow_index(0, 2, 3)});
}

TEST(TopKCritical, LargerFlowOnHottestLinkFirst) {
  Topology line(3, {{0, 1, 1, 1}, {1, 2, 1, 1}, {2, 1, 1, 1}, {1, 0, 1, 1}});
  TrafficMatrix tl(3);
  tl.set(0, 2, 1.0);  // 0->1->2
  tl.set(1, 2, 2.0);  // 1->2
  tl.set(1, 0, 2.5);  // 1->0, less utilized than 1->2 (3.0)
  EXPECT_EQ(top_k_critical(line, EcmpFractions(line), tl, 1).flows,
            std::vector<int>{flow_index(1, 2, 3)});
  EXPECT_EQ(top_k_critical(line, EcmpFractions(line), tl, 2).flows,
            (std::vector<int>{flow_index(1, 2, 3), flow_index(0, 2, 3)}));
  // Top-K by volume would take (1,0) second instead.
  EXPECT_EQ(top_k(tl, 2).flows, (std::vector<int>{flow_index(1, 0, 3), flow_index(1, 2, 3)}));
}

TEST(TopKCritical, SpillsToSecondHottestLink) {
  // Ring 0->1->2->3->0 plus reverse links. Hottest link 0->1 carries flow
  // (0,1) only; the next is 2->3 carrying (2,3).
  Topology ring(4, {{0, 1, 1, 1}, {1, 2, 1, 1}, {2, 3, 1, 1}, {3, 0, 1, 1},
                    {1, 0, 1, 1}, {2, 1, 1, 1}, {3, 2, 1, 1}, {0, 3, 1, 1}});
  TrafficMatrix tm(4);
  tm.set(0, 1, 0.9);
  tm.set(2, 3, 0.6);
  tm.set(3, 0, 0.1);
  tm.set(1, 0, 0.3);
  EcmpFractions fr(ring);
  // By hand: loads 0->1 0.9, 2->3 0.6, 1->0 0.3, 3->0 0.1.
  SelectionResult r = top_k_critical(ring, fr, tm, 3);
  EXPECT_EQ(r.flows, (std::vector<int>{flow_index(0, 1, 4), flow_index(2, 3, 4),
                                       flow_index(1, 0, 4)}));
}

TEST(TopKCritical, FillsFromGlobalOrderWhenWalkRunsOut) {
  Topology t = load_topology(kData + "/triangle3.topo");
  TrafficMatrix tm(3);
  tm.set(0, 2, 0.9);
  SelectionResult r = top_k_critical(t, EcmpFractions(t), tm, 4);
  expect_valid(r, 4, 6);
  EXPECT_EQ(r.flows[0], flow_index(0, 2, 3));
  EXPECT_EQ(r.flows[1], 0);
  EXPECT_EQ(r.flows[2], 2);
}

TEST(RandomK, Properties) {
  expect_valid(random_k(20, 20, 3), 20, 20);
  EXPECT_EQ(random_k(20, 4, 9).flows, random_k(20, 4, 9).flows);
  EXPECT_TRUE(random_k(20, 0, 9).flows.empty());
  std::vector<int> hits(20, 0);
  const int draws = 10000, k = 4;
  for (int i = 0; i < draws; ++i)
    for (int f : random_k(20, k, 1000 + i).flows) ++hits[f];
  const double p = static_cast<double>(k) / 20, sigma = std::sqrt(draws * p * (1 - p));
  for (int h : hits) EXPECT_NEAR(h, draws * p, 4 * sigma);
}

TEST(BruteForce, KZeroAndAllFlows) {
  Topology t = load_topology(kData + "/tiny5.topo");
  EcmpFractions fr(t);
  auto tm = load_tms(kData + "/tiny5.tm", 5)[0];
  SelectionResult zero = brute_force_best(t, fr, tm, 0);
  EXPECT_TRUE(zero.flows.empty());
  EXPECT_NEAR(zero.u, ecmp_max_utilization(t, tm, fr), 1e-12);
  SelectionResult all = brute_force_best(t, fr, tm, 20);
  expect_valid(all, 20, 20);
  EXPECT_NEAR(all.u, solve_optimal_all_flows(t, tm, fr).u_opt, 1e-7);
}

TEST(BruteForce, MatchesFullSubsetEnumeration) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 4; ++trial) {
    Topology t = oracle::random_topology(4, 4, rng);
    EcmpFractions fr(t);
    auto tm = generate_tms(t, TrafficModel::kExponential, 1, 0.9, trial)[0];
    // Sparsify so zero-demand flows are present.
    for (int f = 0; f < 12; f += 3) {
      auto [s, d] = flow_of_index(f, 4);
      tm.set(s, d, 0.0);
    }
    for (int k : {1, 2}) {
      SelectionResult r = brute_force_best(t, fr, tm, k);
      expect_valid(r, k, 12);
      EXPECT_NEAR(r.u, all_subsets_min(t, fr, tm, k), 1e-9) << trial << " k=" << k;
      EXPECT_NEAR(r.u, reroute_critical_flows(t, tm, fr, r.flows).u, 1e-12);
    }
  }
}

TEST(BruteForce, CapAndMonotonicity) {
  Topology t = load_topology(kData + "/abilene.topo");
  EcmpFractions fr(t);
  auto tm = generate_tms(t, TrafficModel::kUniform, 1, 0.9, 1)[0];
  EXPECT_THROW(brute_force_best(t, fr, tm, 3), DomainError);
  EXPECT_EQ(binomial(132, 2), 8646u);
  EXPECT_EQ(binomial(20, 10), 184756u);
  EXPECT_EQ(binomial(5, 7), 0u);

  Topology tiny = load_topology(kData + "/tiny5.topo");
  EcmpFractions ft(tiny);
  for (const auto& m : load_tms(kData + "/tiny5.tm", 5)) {
    double prev = oracle::kInf;
    for (int k = 0; k <= 4; ++k) {
      const double u = brute_force_best(tiny, ft, m, k).u;
      EXPECT_LE(u, prev + 1e-9);
      prev = u;
    }
  }
}

TEST(Selectors, BruteForceDominatesHeuristics) {
  Topology t = load_topology(kData + "/tiny5.topo");
  EcmpFractions fr(t);
  for (const auto& tm : load_tms(kData + "/tiny5.tm", 5)) {
    for (int k = 1; k <= 3; ++k) {
      const double best = brute_force_best(t, fr, tm, k).u;
      for (const SelectionResult& s :
           {top_k(tm, k), top_k_critical(t, fr, tm, k), random_k(20, k, k)}) {
        expect_valid(s, k, 20);
        EXPECT_LE(best, reroute_critical_flows(t, tm, fr, s.flows).u + 1e-9);
      }
    }
  }
}

TEST(Selectors, MethodNames) {
  for (Method m : {Method::kEcmp, Method::kPolicy, Method::kTopK, Method::kTopKCritical,
                   Method::kRandom, Method::kBruteForce})
    EXPECT_EQ(parse_method(to_string(m)), m);
  EXPECT_THROW(parse_method("greedy"), DomainError);
}

TEST(Selectors, PolicySelectIsGreedyTopK) {
  PolicyParams p = PolicyParams::glorot({4, 8, 8}, 2);
  TrafficMatrix tm(4);
  tm.set(0, 1, 1.0);
  tm.set(2, 3, 0.5);
  SelectionResult r = policy_select(p, tm, 3);
  EXPECT_EQ(r.flows, greedy_solution(forward(p, tm), 3).actions);
  expect_valid(r, 3, 12);
}
