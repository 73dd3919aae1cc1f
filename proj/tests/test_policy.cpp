#include <gtest/gtest.h>

#include <numeric>
#include <random>
#include <sstream>

#include "cfr/checkpoint.hpp"
#include "cfr/policy.hpp"
#include "support/oracles.hpp"

using namespace cfr;

namespace {

TrafficMatrix random_tm(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 5.0);
  TrafficMatrix tm(n);
  for (int s = 0; s < n; ++s)
    for (int d = 0; d < n; ++d)
      if (s != d) tm.set(s, d, u(rng));
  return tm;
}

// Glorot weights plus small random biases so no pre-activation sits on the
// Leaky-ReLU kink.
PolicyParams random_params(const PolicyShape& s, std::uint64_t seed) {
  PolicyParams p = PolicyParams::glorot(s, seed);
  std::mt19937_64 rng(seed + 1000);
  std::uniform_real_distribution<double> b(-0.3, 0.3);
  for (double& v : p.conv_b) v = b(rng);
  for (double& v : p.fc1_b) v = b(rng);
  for (double& v : p.fc2_b) v = b(rng);
  return p;
}

ActionDistribution dist_of(std::vector<double> probs) {
  ActionDistribution d;
  d.probs = std::move(probs);
  d.logits.resize(d.probs.size());
  return d;
}

}  // namespace

TEST(Policy, ShapesFollowArchitecture) {
  PolicyParams p = PolicyParams::zeros({5, 128, 128});
  EXPECT_EQ(p.conv_w.size(), 128u * 9);
  EXPECT_EQ(p.conv_b.size(), 128u);
  EXPECT_EQ(p.fc1_w.size(), 128u * 25 * 128);
  EXPECT_EQ(p.fc1_b.size(), 128u);
  EXPECT_EQ(p.fc2_w.size(), 128u * 20);
  EXPECT_EQ(p.fc2_b.size(), 20u);
  ForwardCache c = forward_cached(p, TrafficMatrix(5));
  EXPECT_EQ(c.conv_act.size(), 128u * 25);
  EXPECT_THROW(PolicyParams::zeros({1, 4, 4}), DomainError);
}

TEST(Policy, GlorotRangeAndZeroBiases) {
  PolicyShape s{6, 16, 32};
  PolicyParams p = PolicyParams::glorot(s, 3);
  const double conv = std::sqrt(6.0 / (9 + 9 * 16));
  const double fc1 = std::sqrt(6.0 / (16 * 36 + 32));
  const double fc2 = std::sqrt(6.0 / (32 + 30));
  for (double v : p.conv_w) EXPECT_LE(std::abs(v), conv);
  for (double v : p.fc1_w) EXPECT_LE(std::abs(v), fc1);
  for (double v : p.fc2_w) EXPECT_LE(std::abs(v), fc2);
  for (double v : p.conv_b) EXPECT_EQ(v, 0.0);
  for (double v : p.fc1_b) EXPECT_EQ(v, 0.0);
  for (double v : p.fc2_b) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(p, PolicyParams::glorot(s, 3));
  EXPECT_FALSE(p == PolicyParams::glorot(s, 4));
}

TEST(Policy, ZeroParamsGiveUniform) {
  PolicyParams p = PolicyParams::zeros({4, 8, 8});
  std::mt19937_64 rng(1);
  ActionDistribution d = forward(p, random_tm(4, rng));
  for (double q : d.probs) EXPECT_DOUBLE_EQ(q, 1.0 / 12.0);
}

TEST(Policy, ProbabilitiesSumToOne) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 100; ++i) {
    const int n = 3 + i % 4;
    PolicyParams p = random_params({n, 4, 6}, i);
    ActionDistribution d = forward(p, random_tm(n, rng));
    double sum = 0.0;
    for (double q : d.probs) {
      EXPECT_GE(q, 0.0);
      sum += q;
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(Policy, ScaleInvariantAndPure) {
  std::mt19937_64 rng(3);
  PolicyParams p = PolicyParams::glorot({5, 16, 16}, 9);
  TrafficMatrix tm = random_tm(5, rng);
  ActionDistribution a = forward(p, tm);
  ActionDistribution b = forward(p, tm.scaled(8.0));
  ActionDistribution c = forward(p, tm.scaled(3.7));
  EXPECT_EQ(a.probs, b.probs);
  for (size_t i = 0; i < a.probs.size(); ++i) EXPECT_NEAR(a.probs[i], c.probs[i], 1e-14);
  EXPECT_EQ(a.logits, forward(p, tm).logits);
}

TEST(Policy, ZeroMatrixMapsToZeroInput) {
  PolicyParams p = PolicyParams::glorot({4, 8, 8}, 1);
  ForwardCache c = forward_cached(p, TrafficMatrix(4));
  for (double x : c.input) EXPECT_EQ(x, 0.0);
  EXPECT_THROW(forward(p, TrafficMatrix(5)), DomainError);
}

TEST(Sampling, AllActionsWhenKIsEverything) {
  ActionDistribution d = dist_of(std::vector<double>(12, 1.0 / 12));
  Solution s = sample_solution(d, 12, 5);
  std::vector<int> sorted = s.actions;
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> all(12);
  std::iota(all.begin(), all.end(), 0);
  EXPECT_EQ(sorted, all);
  EXPECT_FALSE(s.used_fallback);
}

TEST(Sampling, UniformFrequencies) {
  ActionDistribution d = dist_of(std::vector<double>(12, 1.0 / 12));
  std::mt19937_64 rng(6);
  std::vector<int> count(12, 0);
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) ++count[sample_solution(d, 1, rng).actions[0]];
  const double p = 1.0 / 12, sigma = std::sqrt(draws * p * (1 - p));
  for (int c : count) EXPECT_NEAR(c, draws * p, 3 * sigma);
}

TEST(Sampling, WithoutReplacementRenormalizes) {
  // P(second = 2 | first = 0) = 0.3 / 0.5 for probs {0.5, 0.2, 0.3}.
  ActionDistribution d = dist_of({0.5, 0.2, 0.3});
  std::mt19937_64 rng(7);
  int first0 = 0, then2 = 0;
  for (int i = 0; i < 100000; ++i) {
    Solution s = sample_solution(d, 2, rng);
    ASSERT_NE(s.actions[0], s.actions[1]);
    if (s.actions[0] == 0) {
      ++first0;
      if (s.actions[1] == 2) ++then2;
    }
  }
  const double p = 0.6, sigma = std::sqrt(first0 * p * (1 - p));
  EXPECT_NEAR(then2, first0 * p, 4 * sigma);
}

TEST(Sampling, PointMassAndFallback) {
  std::vector<double> probs(12, 0.0);
  probs[5] = 1.0;
  ActionDistribution d = dist_of(probs);
  for (std::uint64_t seed = 0; seed < 50; ++seed)
    EXPECT_EQ(sample_solution(d, 1, seed).actions, std::vector<int>{5});
  Solution s = sample_solution(d, 3, 1);
  EXPECT_EQ(s.actions[0], 5);
  EXPECT_TRUE(s.used_fallback);
  EXPECT_NE(s.actions[1], s.actions[2]);
  EXPECT_EQ(sample_solution(d, 3, 1).actions, s.actions);
  EXPECT_THROW(sample_solution(d, 0, 1), DomainError);
  EXPECT_THROW(sample_solution(d, 13, 1), DomainError);
}

TEST(Sampling, GreedyTakesMostProbable) {
  ActionDistribution d = dist_of({0.1, 0.4, 0.1, 0.4});
  EXPECT_EQ(greedy_solution(d, 2).actions, (std::vector<int>{1, 3}));
  EXPECT_EQ(greedy_solution(d, 3).actions, (std::vector<int>{1, 3, 0}));
}

TEST(LogProb, Examples) {
  ActionDistribution u = dist_of(std::vector<double>(20, 0.05));
  EXPECT_NEAR(solution_log_prob(u, {{1, 2, 3}}), 3 * std::log(0.05), 1e-12);
  ActionDistribution d = dist_of({0.2, 0.8, 0.0});
  EXPECT_DOUBLE_EQ(solution_log_prob(d, {{1}}), std::log(0.8));
  EXPECT_TRUE(std::isinf(solution_log_prob(d, {{2}})));
  EXPECT_LT(std::exp(solution_log_prob(d, {{0, 1}})), 1.0);
  EXPECT_EQ(std::exp(solution_log_prob(dist_of({0.0, 1.0}), {{1}})), 1.0);
}

TEST(Entropy, Bounds) {
  EXPECT_NEAR(entropy(dist_of(std::vector<double>(12, 1.0 / 12))), std::log(12.0), 1e-12);
  EXPECT_EQ(entropy(dist_of({0.0, 1.0, 0.0})), 0.0);
  std::mt19937_64 rng(8);
  for (int i = 0; i < 100; ++i) {
    PolicyParams p = random_params({4, 4, 4}, i);
    for (double& w : p.fc2_w) w *= 5.0;
    const double h = entropy(forward(p, random_tm(4, rng)));
    EXPECT_GE(h, 0.0);
    EXPECT_LE(h, std::log(12.0) + 1e-12);
  }
}

TEST(Gradients, ZeroAdvantageZeroBeta) {
  std::mt19937_64 rng(9);
  PolicyParams p = random_params({4, 8, 8}, 1);
  PolicyParams g = gradients(p, random_tm(4, rng), {{0, 5}}, 0.0, 0.0);
  EXPECT_EQ(g, PolicyParams::zeros(p.shape));
}

TEST(Gradients, FiniteDifferencesAllGroupsReducedWidth) {
  for (std::uint64_t seed : {11, 12, 13}) {
    std::mt19937_64 rng(seed);
    TrafficMatrix tm = random_tm(4, rng);
    // Central differences straddling a Leaky-ReLU kink are meaningless; redraw
    // until every pre-activation is clear of it.
    std::uint64_t salt = seed;
    PolicyParams p = random_params({4, 6, 8}, salt);
    while (oracle::kink_margin(p, tm) < 1e-3) p = random_params({4, 6, 8}, salt += 100);
    const std::vector<int> actions = {static_cast<int>(seed % 12), static_cast<int>((seed + 5) % 12)};
    const double adv = 0.7, beta = 0.1;
    PolicyParams g = gradients(p, tm, {actions}, adv, beta);
    for (int group = 0; group < 6; ++group) {
      std::vector<size_t> all(p.groups()[group]->size());
      std::iota(all.begin(), all.end(), 0);
      const double err = oracle::gradient_check(p, g, group, all, tm, actions, adv, beta);
      EXPECT_LT(err, 1e-4) << PolicyParams::kGroupNames[group] << " seed " << seed;
    }
  }
}

TEST(Gradients, LibraryForwardMatchesOracleObjective) {
  std::mt19937_64 rng(14);
  PolicyParams p = random_params({5, 8, 8}, 2);
  TrafficMatrix tm = random_tm(5, rng);
  ActionDistribution d = forward(p, tm);
  Solution sol{{1, 7}};
  const double lib = 0.3 * solution_log_prob(d, sol) + 0.2 * entropy(d);
  EXPECT_NEAR(oracle::policy_objective(p, tm, sol.actions, 0.3, 0.2), lib, 1e-12);
}

TEST(Gradients, EntropyStepIncreasesEntropy) {
  std::mt19937_64 rng(15);
  PolicyParams p = random_params({4, 8, 8}, 3);
  for (double& w : p.fc2_w) w *= 4.0;
  TrafficMatrix tm = random_tm(4, rng);
  const double before = entropy(forward(p, tm));
  PolicyParams g = gradients(p, tm, {{0}}, 0.0, 0.1);
  p.axpy(1e-2, g);
  EXPECT_GT(entropy(forward(p, tm)), before);
}

TEST(Gradients, AscentStepMovesLogProbWithAdvantageSign) {
  std::mt19937_64 rng(16);
  TrafficMatrix tm = random_tm(4, rng);
  const Solution sol{{2, 9}};
  for (double adv : {1.0, -1.0}) {
    PolicyParams p = random_params({4, 8, 8}, 4);
    const double before = solution_log_prob(forward(p, tm), sol);
    p.axpy(1e-3, gradients(p, tm, sol, adv, 0.0));
    const double after = solution_log_prob(forward(p, tm), sol);
    if (adv > 0)
      EXPECT_GT(after, before);
    else
      EXPECT_LT(after, before);
  }
}

TEST(Checkpoint, RoundTrip) {
  Checkpoint ck;
  ck.params = random_params({4, 3, 5}, 7);
  ck.iteration = 1234;
  ck.baseline.record(0, 1.5);
  ck.baseline.record(0, 2.5);
  ck.baseline.record(17, 0.25);
  std::stringstream buf;
  write_checkpoint(ck, buf);
  Checkpoint back = read_checkpoint(buf);
  EXPECT_EQ(back.params, ck.params);
  EXPECT_EQ(back.iteration, 1234u);
  EXPECT_EQ(back.baseline.baseline(0), 2.0);
  EXPECT_EQ(back.baseline.baseline(17), 0.25);
  EXPECT_EQ(back.baseline.baseline(3), 0.0);
}

TEST(Checkpoint, RejectsCorruptInput) {
  std::stringstream bad("NOTACKPT");
  EXPECT_THROW(read_checkpoint(bad), Error);
  Checkpoint ck;
  ck.params = PolicyParams::zeros({3, 2, 2});
  std::stringstream buf;
  write_checkpoint(ck, buf);
  std::string s = buf.str();
  std::stringstream cut(s.substr(0, s.size() - 5));
  EXPECT_THROW(read_checkpoint(cut), Error);
}
