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
#include "cfr/topology.hpp"
#include "cfr/traffic_matrix.hpp"

namespace cfr {

// Target ECMP utilization for demand scaling in delay experiments.
inline constexpr double kDelayTargetUtilization = 0.9;

enum class TrafficModel { kExponential, kUniform };

inline TrafficModel parse_traffic_model(const std::string& name) {
  if (name == "exponential") return TrafficModel::kExponential;
  if (name == "uniform") return TrafficModel::kUniform;
  throw DomainError("unknown traffic model '" + name + "'");
}

inline std::string to_string(TrafficModel model) {
  return model == TrafficModel::kExponential ? "exponential" : "uniform";
}

// Draws i.i.d. off-diagonal demands (Exponential(1) or Uniform[0,1]) and
// rescales each matrix so its ECMP max utilization equals `target_ecmp_util`.
inline std::vector<TrafficMatrix> generate_tms(const Topology& topo, TrafficModel model,
                                               int count, double target_ecmp_util,
                                               std::uint64_t seed) {
  if (count < 1) throw DomainError("count must be at least 1");
  if (!(target_ecmp_util > 0.0) || target_ecmp_util > 1.0)
    throw DomainError("target utilization must lie in (0, 1]");
  const int n = topo.node_count();
  const EcmpFractions fr(topo);
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> expo(1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<TrafficMatrix> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    std::vector<double> demand(static_cast<size_t>(n) * n, 0.0);
    for (int s = 0; s < n; ++s) {
      for (int d = 0; d < n; ++d) {
        if (s == d) continue;
        demand[s * n + d] = model == TrafficModel::kExponential ? expo(rng) : unif(rng);
      }
    }
    TrafficMatrix tm(n, std::move(demand), to_string(model) + "-" + std::to_string(i));
    const double u = ecmp_max_utilization(topo, tm, fr);
    if (u > 0.0) tm = tm.scaled(target_ecmp_util / u);
    tm.set_id(to_string(model) + "-" + std::to_string(i));
    out.push_back(std::move(tm));
  }
  return out;
}

struct Dataset {
  std::vector<TrafficMatrix> matrices;
  std::vector<int> train_indices;
  std::vector<int> test_indices;
  std::uint64_t seed = 0;

  std::vector<TrafficMatrix> train() const { return select(train_indices); }
  std::vector<TrafficMatrix> test() const { return select(test_indices); }

 private:
  std::vector<TrafficMatrix> select(const std::vector<int>& idx) const {
    std::vector<TrafficMatrix> out;
    out.reserve(idx.size());
    for (int i : idx) out.push_back(matrices[i]);
    return out;
  }
};

// Uniformly random split with round(train_fraction * total) training matrices.
// Index lists are returned sorted.
inline Dataset split_dataset(std::vector<TrafficMatrix> matrices, double train_fraction,
                             std::uint64_t seed) {
  if (matrices.size() < 2) throw DomainError("need at least 2 matrices to split");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw DomainError("train fraction must lie in (0, 1)");
  const int total = static_cast<int>(matrices.size());
  const int train = static_cast<int>(std::lround(train_fraction * total));
  std::vector<int> perm(total);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  Dataset ds;
  ds.seed = seed;
  ds.train_indices.assign(perm.begin(), perm.begin() + train);
  ds.test_indices.assign(perm.begin() + train, perm.end());
  std::sort(ds.train_indices.begin(), ds.train_indices.end());
  std::sort(ds.test_indices.begin(), ds.test_indices.end());
  ds.matrices = std::move(matrices);
  return ds;
}

// Multiplies every demand by 0.9 / u_ecmp so ECMP max utilization becomes 0.9.
inline TrafficMatrix scale_tm_for_delay(const TrafficMatrix& tm, double u_ecmp) {
  if (!(u_ecmp > 0.0)) throw DomainError("ECMP utilization must be positive");
  TrafficMatrix out = tm.scaled(kDelayTargetUtilization / u_ecmp);
  out.set_id(tm.id());
  return out;
}

}  // namespace cfr
