// Acceptance checks. Prints one PASS/FAIL line per criterion; exits nonzero if
// any criterion fails.
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "cfr/cfr.hpp"
#include "support/oracles.hpp"

using namespace cfr;

namespace {

const std::string kData = CFR_DATA_DIR;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

Outcome lp_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> dem(0.0, 3.0);
  double worst = 0.0;
  const int cases = 24;
  for (int trial = 0; trial < cases; ++trial) {
    const int n = 4 + trial % 2;
    Topology t = oracle::random_topology(n, n + 2, rng);
    EcmpFractions fr(t);
    TrafficMatrix tm(n);
    for (int s = 0; s < n; ++s)
      for (int d = 0; d < n; ++d)
        if (s != d) tm.set(s, d, dem(rng));
    const int f = static_cast<int>(rng() % t.flow_count());
    auto [s, d] = flow_of_index(f, n);
    tm.set(s, d, 1.0 + dem(rng));
    const double u = reroute_critical_flows(t, tm, fr, std::vector<int>{f}).u;
    const auto bg = ecmp_link_loads(t, tm, fr, std::vector<int>{f}).load;
    worst = std::max(worst, std::abs(u - oracle::single_flow_min_max(t, bg, s, d, tm.at(s, d))));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-6 && secs < 10.0,
          fmt("%.0f single-flow cases, max |u - oracle| = %.3g, %.2f s", cases, worst, secs)};
}

// Abilene's ATLA-M5 leaf makes u_opt = u_ecmp on synthetic traffic, so the
// suite runs on a random 10-node graph where rerouting matters.
Outcome optimal_bound() {
  std::mt19937_64 rng(202);
  Topology t = oracle::random_topology(10, 14, rng);
  auto tms = generate_tms(t, TrafficModel::kExponential, 100, 0.9, 7);
  SuiteOptions opt;
  const int k = resolve_k(0.1, t.node_count());
  SuiteResult r = eval_suite(t, tms,
                             {Method::kEcmp, Method::kTopK, Method::kTopKCritical, Method::kRandom},
                             nullptr, k, opt);
  int bad = 0, strict = 0;
  double min_pr = 2.0, max_pr = 0.0;
  for (const EvalRecord& rec : r.records) {
    if (rec.method == Method::kEcmp) {
      if (rec.u_optimal > rec.u_method + 1e-7) ++bad;
      if (rec.u_optimal < rec.u_method - 1e-6) ++strict;
    }
    if (!(rec.pr_u > 0.0 && rec.pr_u <= 1.0 + 1e-7)) ++bad;
    min_pr = std::min(min_pr, rec.pr_u);
    max_pr = std::max(max_pr, rec.pr_u);
  }
  return {bad == 0 && r.records.size() == 400,
          fmt("%.0f violations over 100 matrices x 4 methods (10-node graph, u_opt < u_ecmp on "
              "%.0f), pr_u in [%.4f, ", bad, strict, min_pr) + fmt("%.9f]", max_pr)};
}

Outcome gradients_fd() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (std::uint64_t seed : {21, 22, 23}) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 5.0);
    TrafficMatrix tm(4);
    for (int s = 0; s < 4; ++s)
      for (int d = 0; d < 4; ++d)
        if (s != d) tm.set(s, d, u(rng));
    // Random biases, redrawn until no pre-activation lies within 1e-3 of the
    // Leaky-ReLU kink (finite differences are invalid across it).
    PolicyParams p = PolicyParams::glorot({4, 8, 8}, seed);
    std::uniform_real_distribution<double> b(-0.3, 0.3);
    do {
      for (double& v : p.conv_b) v = b(rng);
      for (double& v : p.fc1_b) v = b(rng);
      for (double& v : p.fc2_b) v = b(rng);
    } while (oracle::kink_margin(p, tm) < 1e-3);
    const std::vector<int> actions = {static_cast<int>(seed % 12), static_cast<int>((seed + 7) % 12)};
    PolicyParams g = gradients(p, tm, {actions}, 0.6, 0.1);
    for (int group = 0; group < 6; ++group) {
      std::vector<size_t> all(p.groups()[group]->size());
      std::iota(all.begin(), all.end(), 0);
      worst = std::max(worst, oracle::gradient_check(p, g, group, all, tm, actions, 0.6, 0.1));
    }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 60.0,
          fmt("every parameter of all 6 groups, 3 seeds, max rel err = %.3g, %.2f s", worst, secs)};
}

// Mean reward over every k-subset of flows: the expectation of uniform random-K.
double random_k_mean_reward(const Topology& t, const EcmpFractions& fr, const TrafficMatrix& tm,
                            int k) {
  double sum = 0.0;
  int count = 0;
  std::vector<int> pick;
  std::function<void(int)> rec = [&](int start) {
    if (static_cast<int>(pick.size()) == k) {
      sum += compute_reward(t, fr, tm, Solution{pick});
      ++count;
      return;
    }
    for (int f = start; f < t.flow_count(); ++f) {
      pick.push_back(f);
      rec(f + 1);
      pick.pop_back();
    }
  };
  rec(0);
  return sum / count;
}

Outcome learning_gain() {
  const auto t0 = Clock::now();
  Topology t = load_topology(kData + "/tiny5.topo");
  auto tms = load_tms(kData + "/tiny5.tm", 5);
  std::vector<TrainingState> states;
  for (size_t i = 0; i < tms.size(); ++i) states.push_back({static_cast<std::int64_t>(i), tms[i]});
  TrainerConfig c;
  c.k = 2;
  c.actor_count = 1;
  c.total_iterations = 2000;
  c.checkpoint_every = 0;
  c.seed = 1;
  TrainResult r = train_serial(t, states, c);
  EcmpFractions fr(t);
  bool ok = true;
  std::string detail;
  for (const auto& tm : tms) {
    const double greedy =
        compute_reward(t, fr, tm, Solution{policy_select(r.params, tm, 2).flows});
    const double best = compute_reward(t, fr, tm, Solution{brute_force_best(t, fr, tm, 2).flows});
    const double rnd = random_k_mean_reward(t, fr, tm, 2);
    ok = ok && greedy >= 0.95 * best && greedy > rnd;
    detail += tm.id() + fmt(" greedy %.4f bf %.4f random %.4f; ", greedy, best, rnd);
  }
  const double secs = seconds_since(t0);
  ok = ok && secs < 600.0;
  return {ok, detail + fmt("%.1f s", secs)};
}

Outcome k_sweep() {
  Topology t = load_topology(kData + "/tiny5.topo");
  auto tms = load_tms(kData + "/tiny5.tm", 5);
  SuiteOptions opt;
  std::vector<double> fractions;
  for (int k = 1; k <= 20; ++k) fractions.push_back(k / 20.0);
  auto rows = sweep_k(t, tms, fractions, Method::kBruteForce, nullptr, opt);
  bool mono = true;
  for (size_t i = 1; i < rows.size(); ++i)
    mono = mono && rows[i].pr_u.mean >= rows[i - 1].pr_u.mean - 1e-9;
  const double last = rows.back().pr_u.mean;
  return {mono && rows.back().k == 20 && std::abs(last - 1.0) <= 1e-6,
          fmt("K = 0..20, mean pr_u from %.4f to %.8f, non-decreasing = %.0f",
              rows.front().pr_u.mean, last, mono)};
}

Outcome heuristic_order() {
  Topology t = load_topology(kData + "/tiny5.topo");
  EcmpFractions fr(t);
  bool ok = true;
  for (const auto& tm : load_tms(kData + "/tiny5.tm", 5)) {
    const double bf = brute_force_best(t, fr, tm, 2).u;
    ok = ok && bf <= reroute_critical_flows(t, tm, fr, top_k_critical(t, fr, tm, 2).flows).u + 1e-9;
    ok = ok && bf <= reroute_critical_flows(t, tm, fr, top_k(tm, 2).flows).u + 1e-9;
  }
  std::string detail = std::string("tiny brute force dominates: ") + (ok ? "yes" : "no");
  for (const char* name : {"abilene.topo", "ebone_like.topo"}) {
    Topology big = load_topology(kData + "/" + name);
    EcmpFractions bfr(big);
    const int k = resolve_k(0.1, big.node_count());
    double rd_top = 0.0, rd_crit = 0.0;
    auto tms = generate_tms(big, TrafficModel::kExponential, 50, 0.9, 3);
    for (const auto& tm : tms) {
      rd_top += rerouting_disturbance(tm, top_k(tm, k).flows);
      rd_crit += rerouting_disturbance(tm, top_k_critical(big, bfr, tm, k).flows);
    }
    rd_top /= tms.size();
    rd_crit /= tms.size();
    ok = ok && rd_top > rd_crit;
    detail += "; " + std::string(name) + fmt(" mean rd top_k %.4f > critical %.4f", rd_top, rd_crit);
  }
  return {ok, detail};
}

Outcome delay_oracle() {
  Topology t = load_topology(kData + "/triangle3.topo");
  EcmpFractions fr(t);
  double worst = 0.0;
  for (double demand : {0.4, 0.9, 1.5}) {
    TrafficMatrix tm(3);
    tm.set(0, 2, demand);
    const double lo = std::max(0.0, demand - 0.999999), hi = std::min(demand, 0.999999);
    const double expect = oracle::grid_minimum(
        [&](double x) { return oracle::link_delay(x, 1.0) + 2.0 * oracle::link_delay(demand - x, 1.0); },
        lo, hi);
    worst = std::max(worst, std::abs(solve_delay_optimal(t, tm, fr).omega_opt - expect));
  }
  Topology one(2, {{0, 1, 1.0, 1.0}, {1, 0, 1.0, 1.0}});
  const double single = evaluate_delay(one, std::vector<double>{0.5, 0.0});
  return {worst <= 1e-4 && single == 1.0,
          fmt("max |omega - grid| = %.3g; delay(l=0.5, c=1) = %.17g", worst, single)};
}

Outcome determinism() {
  Topology t = load_topology(kData + "/tiny5.topo");
  auto tms = load_tms(kData + "/tiny5.tm", 5);
  std::vector<TrainingState> states;
  for (size_t i = 0; i < tms.size(); ++i) states.push_back({static_cast<std::int64_t>(i), tms[i]});
  TrainerConfig c;
  c.k = 2;
  c.actor_count = 1;
  c.filters = 16;
  c.hidden = 16;
  c.batch_size = 8;
  c.total_iterations = 40;
  c.alpha0 = 0.01;
  c.seed = 9;
  c.checkpoint_every = 1;
  std::map<std::uint64_t, Checkpoint> cks;
  TrainHooks hooks;
  hooks.on_checkpoint = [&](const Checkpoint& ck) { cks[ck.iteration] = ck; };
  TrainResult a = train_serial(t, states, c, hooks);
  TrainResult b = train_serial(t, states, c);
  std::ostringstream la, lb;
  write_training_log(a.log, la, false);
  write_training_log(b.log, lb, false);
  std::ostringstream pa, pb;
  write_checkpoint({a.params, static_cast<std::uint64_t>(c.total_iterations), a.baseline}, pa);
  write_checkpoint({b.params, static_cast<std::uint64_t>(c.total_iterations), b.baseline}, pb);
  const bool same = la.str() == lb.str() && pa.str() == pb.str();

  const long it = 23;
  const Checkpoint& before = cks.at(it);
  const Checkpoint& after = cks.at(it + 1);
  PolicyParams delta = PolicyParams::zeros(before.params.shape);
  for (const Experience& e : a.experiences) {
    if (e.iteration != it) continue;
    delta.axpy(learning_rate(c, it),
               gradients(before.params, tms[e.state], {e.actions}, e.reward - e.baseline, c.beta));
  }
  double worst = 0.0;
  auto d = delta.groups();
  auto x = after.params.groups();
  auto y = before.params.groups();
  for (size_t g = 0; g < d.size(); ++g)
    for (size_t i = 0; i < d[g]->size(); ++i)
      worst = std::max(worst, std::abs((*x[g])[i] - (*y[g])[i] - (*d[g])[i]));
  return {same && worst <= 1e-9,
          fmt("log and checkpoint bytes identical = %.0f; replay of iteration 23 max err %.3g",
              same, worst)};
}

Outcome ecmp_semantics() {
  Topology diamond = load_topology(kData + "/diamond4.topo");
  EcmpFractions dfr(diamond);
  const int f = flow_index(0, 3, 4);
  const bool split = dfr.fraction(f, *diamond.find_link(0, 1)) == 0.5 &&
                     dfr.fraction(f, *diamond.find_link(0, 2)) == 0.5 &&
                     dfr.fraction(f, *diamond.find_link(1, 3)) == 0.5 &&
                     dfr.fraction(f, *diamond.find_link(2, 3)) == 0.5;
  std::mt19937_64 rng(606);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 3 + trial % 4;
    Topology t = oracle::random_topology(n, 2 * n, rng);
    EcmpFractions fr(t);
    for (int g = 0; g < t.flow_count(); ++g) {
      auto [s, d] = flow_of_index(g, n);
      const auto expect = oracle::ecmp_by_paths(t, s, d);
      for (int e = 0; e < t.link_count(); ++e)
        worst = std::max(worst, std::abs(fr.fraction(g, e) - expect[e]));
    }
  }
  return {split && worst <= 1e-9,
          fmt("diamond exact 0.5 split = %.0f; 10 random graphs max err %.3g", split, worst)};
}

Outcome schedule() {
  TrainerConfig c;
  bool ok = true;
  std::string detail;
  for (long i : {0L, 499L, 500L, 10000L}) {
    const double expect =
        std::max(c.alpha_min, c.alpha0 * std::pow(0.96, static_cast<double>(i / 500)));
    const double got = learning_rate(c, i);
    ok = ok && got == expect;
    detail += fmt("a(%.0f)=%.10g ", static_cast<double>(i), got);
  }
  ok = ok && learning_rate(c, 499) == 0.001 && learning_rate(c, 500) == 0.001 * 0.96;
  return {ok, detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"LP oracle equivalence", lp_oracle},
      {"optimal-oracle feasibility bound", optimal_bound},
      {"gradient correctness", gradients_fd},
      {"learning gain", learning_gain},
      {"K-sweep shape", k_sweep},
      {"heuristic dominance ordering", heuristic_order},
      {"delay-oracle correctness", delay_oracle},
      {"determinism and replay", determinism},
      {"ECMP semantics", ecmp_semantics},
      {"schedule fidelity", schedule},
  };
  int failed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s criterion %zu (%s): %s\n", o.pass ? "PASS" : "FAIL", i + 1,
                criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
