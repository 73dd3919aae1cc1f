#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "cfr/delay.hpp"
#include "cfr/ecmp.hpp"
#include "cfr/policy.hpp"
#include "cfr/rerouting.hpp"
#include "cfr/selectors.hpp"
#include "cfr/topology.hpp"
#include "cfr/traffic.hpp"

namespace cfr {

struct EvalRecord {
  std::string tm_id;
  Method method = Method::kEcmp;
  int k = 0;
  double u_method = 0.0;
  double u_optimal = 0.0;
  double pr_u = 0.0;
  double omega_method = 0.0;
  double omega_optimal = 0.0;
  double pr_omega = 0.0;
  double rd = 0.0;
};

// Per-matrix quantities shared by every method.
struct OracleValues {
  double u_ecmp = 0.0;
  double u_opt = 0.0;
  double omega_opt = 0.0;
};

struct DelayOptions {
  int max_iters = 100000;  // FW needs ~2e4 iterations for tol on a 23-node graph
  double tol = 1e-5;
};

inline OracleValues compute_oracles(const Topology& topo, const EcmpFractions& fr,
                                    const TrafficMatrix& tm, const DelayOptions& delay = {}) {
  OracleValues o;
  o.u_ecmp = ecmp_max_utilization(topo, tm, fr);
  o.u_opt = solve_min_max_utilization(topo, tm).u_opt;
  o.omega_opt = solve_delay_optimal(topo, tm, fr, delay.max_iters, delay.tol).omega_opt;
  return o;
}

// Fraction of total demand carried by `flows`; 0 for an all-zero matrix.
inline double rerouting_disturbance(const TrafficMatrix& tm, const std::vector<int>& flows) {
  const double total = tm.total();
  if (total <= 0.0) return 0.0;
  double sel = 0.0;
  for (int f : flows) {
    auto [s, d] = flow_of_index(f, tm.n());
    sel += tm.at(s, d);
  }
  return sel / total;
}

namespace detail {

// a / b with 0/0 = 1 (nothing to improve) and a/inf = 0.
inline double ratio(double a, double b) {
  if (b == 0.0) return a == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  if (std::isinf(b)) return 0.0;
  return a / b;
}

}  // namespace detail

// The selection is rerouted with the max-utilization LP; delay is measured on
// those same loads.
inline EvalRecord eval_one(const Topology& topo, const EcmpFractions& fr,
                           const TrafficMatrix& tm, const SelectionResult& selection,
                           const OracleValues& oracle) {
  const ReroutingSolution r = reroute_critical_flows(topo, tm, fr, selection.flows);
  EvalRecord rec;
  rec.tm_id = tm.id();
  rec.method = selection.method;
  rec.k = static_cast<int>(selection.flows.size());
  rec.u_method = r.u;
  rec.u_optimal = oracle.u_opt;
  rec.pr_u = detail::ratio(oracle.u_opt, r.u);
  rec.omega_method = evaluate_delay(topo, r.link_loads.load);
  rec.omega_optimal = oracle.omega_opt;
  rec.pr_omega = detail::ratio(oracle.omega_opt, rec.omega_method);
  rec.rd = rerouting_disturbance(tm, selection.flows);
  return rec;
}

inline EvalRecord eval_one(const Topology& topo, const EcmpFractions& fr,
                           const TrafficMatrix& tm, const SelectionResult& selection) {
  return eval_one(topo, fr, tm, selection, compute_oracles(topo, fr, tm));
}

struct Summary {
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation
  int count = 0;
};

inline Summary summarize(const std::vector<double>& xs) {
  Summary s;
  s.count = static_cast<int>(xs.size());
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= s.count;
  for (double x : xs) s.stddev += (x - s.mean) * (x - s.mean);
  s.stddev = std::sqrt(s.stddev / s.count);
  return s;
}

struct CdfPoint {
  double x;
  double f;
};

// Empirical CDF at each sorted sample: F(x_(i)) = (i + 1) / n.
inline std::vector<CdfPoint> empirical_cdf(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  std::vector<CdfPoint> out;
  for (size_t i = 0; i < xs.size(); ++i)
    out.push_back({xs[i], static_cast<double>(i + 1) / static_cast<double>(xs.size())});
  return out;
}

inline const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names = {"pr_u", "pr_omega", "rd"};
  return names;
}

inline double metric_value(const EvalRecord& r, const std::string& metric) {
  if (metric == "pr_u") return r.pr_u;
  if (metric == "pr_omega") return r.pr_omega;
  if (metric == "rd") return r.rd;
  throw DomainError("unknown metric '" + metric + "'");
}

struct SuiteOptions {
  std::uint64_t seed = 1;  // random_k selections
  std::uint64_t brute_force_cap = kDefaultBruteForceCap;
  bool scale_for_delay = true;  // rescale each matrix to ECMP utilization 0.9
  DelayOptions delay;
  unsigned threads = 0;  // 0 = hardware concurrency
};

struct SuiteResult {
  std::vector<EvalRecord> records;  // ordered by (matrix, method)
  std::map<std::string, std::map<std::string, Summary>> summary;  // method -> metric
  std::map<std::string, std::map<std::string, std::vector<CdfPoint>>> cdf;
};

inline SelectionResult select_flows(Method method, const Topology& topo,
                                    const EcmpFractions& fr, const TrafficMatrix& tm, int k,
                                    const PolicyParams* policy, std::uint64_t seed,
                                    std::uint64_t brute_force_cap = kDefaultBruteForceCap) {
  switch (method) {
    case Method::kEcmp: return {{}, Method::kEcmp};
    case Method::kTopK: return top_k(tm, k);
    case Method::kTopKCritical: return top_k_critical(topo, fr, tm, k);
    case Method::kRandom: return random_k(topo.flow_count(), k, seed);
    case Method::kBruteForce: return brute_force_best(topo, fr, tm, k, brute_force_cap);
    case Method::kPolicy:
      if (!policy) throw DomainError("policy method requires a trained checkpoint");
      return policy_select(*policy, tm, k);
  }
  throw DomainError("unknown method");
}

// Evaluates every method on every matrix. Policy selection is greedy (the K
// most probable actions).
inline SuiteResult eval_suite(const Topology& topo, const std::vector<TrafficMatrix>& tms,
                              const std::vector<Method>& methods, const PolicyParams* policy,
                              int k, const SuiteOptions& options = {}) {
  const bool wants_policy =
      std::find(methods.begin(), methods.end(), Method::kPolicy) != methods.end();
  if (wants_policy && !policy)
    throw DomainError("policy method requires a trained checkpoint");
  if (policy && policy->shape.nodes != topo.node_count())
    throw DomainError("checkpoint node count does not match topology");
  const EcmpFractions fr(topo);
  const size_t nm = methods.size();
  std::vector<EvalRecord> records(tms.size() * nm);
  std::vector<std::string> errors(tms.size());
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next++; i < tms.size(); i = next++) {
      try {
        TrafficMatrix tm = tms[i];
        if (options.scale_for_delay) {
          const double u = ecmp_max_utilization(topo, tm, fr);
          if (u > 0.0) tm = scale_tm_for_delay(tm, u);
        }
        const OracleValues oracle = compute_oracles(topo, fr, tm, options.delay);
        for (size_t j = 0; j < nm; ++j) {
          const int kk = methods[j] == Method::kEcmp ? 0 : k;
          const SelectionResult sel =
              select_flows(methods[j], topo, fr, tm, kk, policy,
                           options.seed + static_cast<std::uint64_t>(i), options.brute_force_cap);
          records[i * nm + j] = eval_one(topo, fr, tm, sel, oracle);
          records[i * nm + j].method = methods[j];
        }
      } catch (const std::exception& e) {
        errors[i] = "matrix '" + tms[i].id() + "': " + e.what();
      }
    }
  };
  unsigned threads = options.threads ? options.threads : std::thread::hardware_concurrency();
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(tms.size())));
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
  }
  for (const std::string& e : errors) {
    if (!e.empty()) throw Error(e);
  }

  SuiteResult out;
  out.records = std::move(records);
  for (Method m : methods) {
    const std::string name = to_string(m);
    for (const std::string& metric : metric_names()) {
      std::vector<double> xs;
      for (const EvalRecord& r : out.records) {
        if (r.method == m) xs.push_back(metric_value(r, metric));
      }
      out.summary[name][metric] = summarize(xs);
      out.cdf[name][metric] = empirical_cdf(xs);
    }
  }
  return out;
}

inline void write_records_csv(const std::vector<EvalRecord>& records, std::ostream& out) {
  out << "tm_id,method,k,u_method,u_optimal,pr_u,omega_method,omega_optimal,pr_omega,rd\n";
  char buf[320];
  for (const EvalRecord& r : records) {
    std::snprintf(buf, sizeof buf, "%s,%s,%d,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n",
                  r.tm_id.c_str(), to_string(r.method).c_str(), r.k, r.u_method, r.u_optimal,
                  r.pr_u, r.omega_method, r.omega_optimal, r.pr_omega, r.rd);
    out << buf;
  }
}

inline void write_summary_csv(const SuiteResult& result, std::ostream& out) {
  out << "method,metric,mean,stddev,count\n";
  char buf[200];
  for (const auto& [method, metrics] : result.summary) {
    for (const auto& [metric, s] : metrics) {
      std::snprintf(buf, sizeof buf, "%s,%s,%.10g,%.10g,%d\n", method.c_str(),
                    metric.c_str(), s.mean, s.stddev, s.count);
      out << buf;
    }
  }
}

inline void write_cdf_csv(const SuiteResult& result, std::ostream& out) {
  out << "method,metric,x,F\n";
  char buf[200];
  for (const auto& [method, metrics] : result.cdf) {
    for (const auto& [metric, points] : metrics) {
      for (const CdfPoint& p : points) {
        std::snprintf(buf, sizeof buf, "%s,%s,%.10g,%.10g\n", method.c_str(), metric.c_str(),
                      p.x, p.f);
        out << buf;
      }
    }
  }
}

}  // namespace cfr
