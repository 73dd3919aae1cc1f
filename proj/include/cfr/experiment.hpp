#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cfr/error.hpp"
#include "cfr/metrics.hpp"
#include "cfr/selectors.hpp"
#include "cfr/trainer.hpp"

namespace cfr {

// K = round-half-up(k_fraction * N(N-1)), at least 1.
inline int resolve_k(double k_fraction, int node_count) {
  if (!(k_fraction > 0.0 && k_fraction <= 1.0))
    throw DomainError("k fraction must lie in (0, 1]");
  const int flows = node_count * (node_count - 1);
  return std::max(1, static_cast<int>(std::floor(k_fraction * flows + 0.5)));
}

struct SweepRow {
  double fraction = 0.0;
  int k = 0;
  Summary pr_u;
};

// Mean PR_U for each K fraction with the given selector. A K = 0 row (plain
// ECMP) is always emitted first.
inline std::vector<SweepRow> sweep_k(const Topology& topo, const std::vector<TrafficMatrix>& tms,
                                     const std::vector<double>& fractions, Method method,
                                     const PolicyParams* policy, const SuiteOptions& options) {
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw DomainError("k fractions must lie in (0, 1]");
  }
  std::vector<SweepRow> rows;
  SuiteResult ecmp = eval_suite(topo, tms, {Method::kEcmp}, nullptr, 0, options);
  rows.push_back({0.0, 0, ecmp.summary["ecmp"]["pr_u"]});
  for (double f : fractions) {
    const int k = resolve_k(f, topo.node_count());
    SuiteResult r = eval_suite(topo, tms, {method}, policy, k, options);
    rows.push_back({f, k, r.summary[to_string(method)]["pr_u"]});
  }
  return rows;
}

inline void write_sweep_csv(const std::vector<SweepRow>& rows, Method method, std::ostream& out) {
  out << "method,k_fraction,k,mean_pr_u,stddev_pr_u,count\n";
  char buf[200];
  for (const SweepRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.6g,%d,%.10g,%.10g,%d\n",
                  (r.k == 0 ? "ecmp" : to_string(method)).c_str(), r.fraction, r.k,
                  r.pr_u.mean, r.pr_u.stddev, r.pr_u.count);
    out << buf;
  }
}

struct HyperCell {
  double alpha0;
  int width;  // conv filters and hidden neurons
  double beta;
};

// alpha0 in {0.01, 0.001, 0.0001} x width in {64, 128, 256} x beta in {0.1, 0.01}.
inline std::vector<HyperCell> default_hyper_grid() {
  std::vector<HyperCell> grid;
  for (double a : {0.01, 0.001, 0.0001}) {
    for (int w : {64, 128, 256}) {
      for (double b : {0.1, 0.01}) grid.push_back({a, w, b});
    }
  }
  return grid;
}

// alpha_min is capped at alpha0 so a 0.0001 start runs without decay.
inline TrainerConfig apply_cell(TrainerConfig base, const HyperCell& cell) {
  base.alpha0 = cell.alpha0;
  base.alpha_min = std::min(base.alpha_min, cell.alpha0);
  base.filters = cell.width;
  base.hidden = cell.width;
  base.beta = cell.beta;
  return base;
}

}  // namespace cfr
