#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cfr/checkpoint.hpp"
#include "cfr/ecmp.hpp"
#include "cfr/error.hpp"
#include "cfr/policy.hpp"
#include "cfr/rerouting.hpp"
#include "cfr/topology.hpp"
#include "cfr/traffic.hpp"

namespace cfr {

struct TrainerConfig {
  double alpha0 = 0.001;
  int decay_every = 500;
  double decay_base = 0.96;
  double alpha_min = 0.0001;
  double beta = 0.1;
  int batch_size = 20;
  int k = 1;
  int actor_count = 20;
  long total_iterations = 1000;
  std::uint64_t seed = 1;
  int filters = 128;
  int hidden = 128;
  int checkpoint_every = 500;
  bool sync = false;  // deterministic round-based parallel mode

  void validate() const {
    if (!(alpha0 > 0.0) || !(alpha_min > 0.0) || alpha_min > alpha0)
      throw DomainError("learning rates must satisfy 0 < alpha_min <= alpha0");
    if (decay_every < 1 || !(decay_base > 0.0))
      throw DomainError("decay schedule must be positive");
    if (beta < 0.0) throw DomainError("beta must be non-negative");
    if (batch_size < 1 || k < 1 || actor_count < 1 || total_iterations < 0)
      throw DomainError("batch size, k and actor count must be positive");
    if (filters < 1 || hidden < 1) throw DomainError("layer widths must be positive");
    if (checkpoint_every < 0) throw DomainError("checkpoint interval must be >= 0");
  }
};

// alpha(i) = max(alpha_min, alpha0 * decay_base^floor(i / decay_every))
inline double learning_rate(const TrainerConfig& c, long iteration) {
  const double decayed =
      c.alpha0 * std::pow(c.decay_base, static_cast<double>(iteration / c.decay_every));
  return std::max(c.alpha_min, decayed);
}

// 1 / U after rerouting the solution's flows over ECMP background load.
inline double compute_reward(const Topology& topo, const EcmpFractions& fr,
                             const TrafficMatrix& tm, const Solution& sol) {
  const ReroutingSolution r = reroute_critical_flows(topo, tm, fr, sol.actions);
  if (!(r.u > 0.0)) throw DomainError("degenerate state: zero traffic");
  return 1.0 / r.u;
}

struct TrainingState {
  std::int64_t id;  // index of the matrix in the dataset
  TrafficMatrix tm;
};

// Training states of `ds`, skipping all-zero matrices.
inline std::vector<TrainingState> training_states(const Dataset& ds,
                                                  std::vector<std::string>* warnings = nullptr) {
  std::vector<TrainingState> out;
  for (int idx : ds.train_indices) {
    const TrafficMatrix& tm = ds.matrices[idx];
    if (tm.total() <= 0.0) {
      if (warnings)
        warnings->push_back("skipping all-zero traffic matrix '" + tm.id() + "'");
      continue;
    }
    out.push_back({idx, tm});
  }
  return out;
}

struct Experience {
  long iteration = 0;  // learner update this sample contributed to
  int actor = 0;
  std::int64_t state = 0;
  std::vector<int> actions;
  double reward = 0.0;
  double baseline = 0.0;
  double advantage = 0.0;
};

struct IterationLog {
  long iteration = 0;
  double mean_reward = 0.0;
  double mean_entropy = 0.0;
  double alpha = 0.0;
  double wall_ms = 0.0;
};

struct TrainResult {
  PolicyParams params;
  BaselineTable baseline;
  std::vector<IterationLog> log;
  std::vector<Experience> experiences;
  std::vector<std::string> warnings;  // e.g. actor failures
  long updates = 0;
};

struct TrainHooks {
  std::function<void(const Checkpoint&)> on_checkpoint;
  bool record_experiences = true;
  std::optional<Checkpoint> resume;
};

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

struct Sample {
  std::int64_t state = 0;
  int slot = 0;  // index into the state list
  Solution solution;
  double reward = 0.0;
  double entropy = 0.0;
  int actor = 0;
};

// Draws one batch: states uniformly from `slots`, one sampled solution each.
template <typename Rng>
std::vector<Sample> draw_batch(const Topology& topo, const EcmpFractions& fr,
                               const std::vector<TrainingState>& states,
                               const std::vector<int>& slots, const PolicyParams& params,
                               int batch_size, int k, Rng& rng,
                               std::vector<ForwardCache>* caches = nullptr) {
  std::uniform_int_distribution<size_t> pick(0, slots.size() - 1);
  std::vector<Sample> batch(batch_size);
  if (caches) caches->clear();
  for (Sample& s : batch) {
    s.slot = slots[pick(rng)];
    s.state = states[s.slot].id;
    ForwardCache cache = forward_cached(params, states[s.slot].tm);
    s.solution = sample_solution(cache.dist, k, rng);
    s.entropy = entropy(cache.dist);
    s.reward = compute_reward(topo, fr, states[s.slot].tm, s.solution);
    if (caches) caches->push_back(std::move(cache));
  }
  return batch;
}

// Applies one update built from `batch`: baselines are read before any of the
// batch's rewards are recorded, then params += sum_t alpha * grad_t.
inline IterationLog apply_batch(PolicyParams& params, BaselineTable& table,
                                const std::vector<TrainingState>& states,
                                const std::vector<Sample>& batch,
                                const std::vector<ForwardCache>* caches, double alpha,
                                double beta, long iteration,
                                std::vector<Experience>* experiences) {
  std::vector<double> baselines(batch.size());
  for (size_t t = 0; t < batch.size(); ++t) baselines[t] = table.baseline(batch[t].state);
  PolicyParams delta = PolicyParams::zeros(params.shape);
  IterationLog log;
  log.iteration = iteration;
  log.alpha = alpha;
  for (size_t t = 0; t < batch.size(); ++t) {
    const Sample& s = batch[t];
    const double advantage = s.reward - baselines[t];
    if (caches) {
      accumulate_gradients(params, (*caches)[t], s.solution, advantage, beta, alpha, delta);
    } else {
      const ForwardCache cache = forward_cached(params, states[s.slot].tm);
      accumulate_gradients(params, cache, s.solution, advantage, beta, alpha, delta);
    }
    log.mean_reward += s.reward;
    log.mean_entropy += s.entropy;
    if (experiences) {
      experiences->push_back({iteration, s.actor, s.state, s.solution.actions, s.reward,
                              baselines[t], advantage});
    }
  }
  log.mean_reward /= static_cast<double>(batch.size());
  log.mean_entropy /= static_cast<double>(batch.size());

  auto dst = params.groups();
  auto src = delta.groups();
  for (size_t g = 0; g < dst.size(); ++g) {
    for (size_t i = 0; i < dst[g]->size(); ++i) {
      if (!std::isfinite((*dst[g])[i] + (*src[g])[i]))
        throw Error(std::string("non-finite parameter in ") + PolicyParams::kGroupNames[g]);
    }
  }
  params.axpy(1.0, delta);
  for (const Sample& s : batch) table.record(s.state, s.reward);
  return log;
}

inline PolicyParams initial_params(const Topology& topo, const TrainerConfig& config,
                                   const TrainHooks& hooks) {
  const PolicyShape shape{topo.node_count(), config.filters, config.hidden};
  if (hooks.resume) {
    if (!(hooks.resume->params.shape == shape))
      throw DomainError("checkpoint shape does not match the configuration");
    return hooks.resume->params;
  }
  return PolicyParams::glorot(shape, mix_seed(config.seed, 0));
}

// Bounded FIFO with producer accounting; pop() returns nullopt once every
// producer has exited and the queue is drained.
template <typename T>
class Channel {
 public:
  Channel(size_t capacity, int producers) : capacity_(capacity), producers_(producers) {}

  bool push(T item) {
    std::unique_lock lock(mu_);
    not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
    if (closed_) return false;
    items_.push_back(std::move(item));
    not_empty_.notify_one();
    return true;
  }

  std::optional<T> pop() {
    std::unique_lock lock(mu_);
    not_empty_.wait(lock, [&] { return !items_.empty() || producers_ == 0; });
    if (items_.empty()) return std::nullopt;
    T item = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return item;
  }

  void producer_exited() {
    std::lock_guard lock(mu_);
    --producers_;
    not_empty_.notify_all();
  }

  void close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    not_full_.notify_all();
  }

 private:
  std::mutex mu_;
  std::condition_variable not_full_, not_empty_;
  std::deque<T> items_;
  size_t capacity_;
  int producers_;
  bool closed_ = false;
};

}  // namespace detail

// Single-threaded Algorithm-1 REINFORCE loop. Bit-deterministic for a seed.
inline TrainResult train_serial(const Topology& topo, const std::vector<TrainingState>& states,
                                const TrainerConfig& config, const TrainHooks& hooks = {}) {
  config.validate();
  if (states.empty()) throw DomainError("training set is empty");
  if (config.k > topo.flow_count()) throw DomainError("k exceeds the number of flows");
  const EcmpFractions fr(topo);
  TrainResult result;
  result.params = detail::initial_params(topo, config, hooks);
  long start = 0;
  if (hooks.resume) {
    result.baseline = hooks.resume->baseline;
    start = static_cast<long>(hooks.resume->iteration);
  }
  std::vector<int> slots(states.size());
  for (size_t i = 0; i < states.size(); ++i) slots[i] = static_cast<int>(i);
  std::mt19937_64 rng(detail::mix_seed(config.seed, 1));
  std::vector<ForwardCache> caches;
  std::vector<Experience>* exp = hooks.record_experiences ? &result.experiences : nullptr;

  for (long it = start; it < config.total_iterations; ++it) {
    const auto t0 = std::chrono::steady_clock::now();
    const double alpha = learning_rate(config, it);
    auto batch = detail::draw_batch(topo, fr, states, slots, result.params,
                                    config.batch_size, config.k, rng, &caches);
    IterationLog log;
    try {
      log = detail::apply_batch(result.params, result.baseline, states, batch, &caches,
                                alpha, config.beta, it, exp);
    } catch (const Error&) {
      if (hooks.on_checkpoint)
        hooks.on_checkpoint({result.params, static_cast<std::uint64_t>(it), result.baseline});
      throw;
    }
    log.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    result.log.push_back(log);
    ++result.updates;
    if (hooks.on_checkpoint && config.checkpoint_every > 0 &&
        (it + 1) % config.checkpoint_every == 0)
      hooks.on_checkpoint(
          {result.params, static_cast<std::uint64_t>(it + 1), result.baseline});
  }
  return result;
}

// Actor/learner training. Actor a owns the training states with index
// i % actors == a; the learner applies each received batch against the
// current parameters. Async by default; `sync` runs lockstep rounds where
// every actor samples from the same snapshot and batches are applied in actor
// order, which makes the run deterministic.
inline TrainResult train_parallel(const Topology& topo,
                                  const std::vector<TrainingState>& states,
                                  const TrainerConfig& config, const TrainHooks& hooks = {}) {
  config.validate();
  if (states.empty()) throw DomainError("training set is empty");
  if (config.k > topo.flow_count()) throw DomainError("k exceeds the number of flows");
  const EcmpFractions fr(topo);
  TrainResult result;
  result.params = detail::initial_params(topo, config, hooks);
  long it = 0;
  if (hooks.resume) {
    result.baseline = hooks.resume->baseline;
    it = static_cast<long>(hooks.resume->iteration);
  }
  const int actors = std::min<int>(config.actor_count, static_cast<int>(states.size()));
  if (actors < config.actor_count) {
    result.warnings.push_back("only " + std::to_string(states.size()) +
                              " training states; running " + std::to_string(actors) +
                              " actors");
  }
  std::vector<std::vector<int>> slices(actors);
  for (size_t i = 0; i < states.size(); ++i) slices[i % actors].push_back(static_cast<int>(i));
  std::vector<Experience>* exp = hooks.record_experiences ? &result.experiences : nullptr;

  auto learn = [&](std::vector<detail::Sample>& batch, int actor,
                   std::chrono::steady_clock::time_point t0) {
    for (auto& s : batch) s.actor = actor;
    IterationLog log;
    try {
      log = detail::apply_batch(result.params, result.baseline, states, batch, nullptr,
                                learning_rate(config, it), config.beta, it, exp);
    } catch (const Error&) {
      if (hooks.on_checkpoint)
        hooks.on_checkpoint({result.params, static_cast<std::uint64_t>(it), result.baseline});
      throw;
    }
    log.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    result.log.push_back(log);
    ++result.updates;
    ++it;
    if (hooks.on_checkpoint && config.checkpoint_every > 0 && it % config.checkpoint_every == 0)
      hooks.on_checkpoint({result.params, static_cast<std::uint64_t>(it), result.baseline});
  };

  if (config.sync) {
    std::vector<std::mt19937_64> rngs;
    for (int a = 0; a < actors; ++a) rngs.emplace_back(detail::mix_seed(config.seed, 2 + a));
    std::vector<bool> alive(actors, true);
    while (it < config.total_iterations) {
      const auto t0 = std::chrono::steady_clock::now();
      std::vector<std::vector<detail::Sample>> batches(actors);
      std::vector<std::string> errors(actors);
      {
        std::vector<std::jthread> pool;
        for (int a = 0; a < actors; ++a) {
          if (!alive[a]) continue;
          pool.emplace_back([&, a] {
            try {
              batches[a] = detail::draw_batch(topo, fr, states, slices[a], result.params,
                                              config.batch_size, config.k, rngs[a]);
            } catch (const std::exception& e) {
              errors[a] = e.what();
            }
          });
        }
      }
      for (int a = 0; a < actors; ++a) {
        if (alive[a] && !errors[a].empty()) {
          alive[a] = false;
          result.warnings.push_back("actor " + std::to_string(a) + " failed: " + errors[a]);
        }
      }
      if (std::none_of(alive.begin(), alive.end(), [](bool b) { return b; }))
        throw Error("all actors failed");
      for (int a = 0; a < actors && it < config.total_iterations; ++a) {
        if (alive[a]) learn(batches[a], a, t0);
      }
    }
    return result;
  }

  struct Batch {
    int actor;
    std::vector<detail::Sample> samples;
  };
  detail::Channel<Batch> channel(4 * static_cast<size_t>(actors), actors);
  std::mutex snapshot_mu;
  auto snapshot = std::make_shared<const PolicyParams>(result.params);
  std::atomic<bool> stop{false};
  std::mutex error_mu;
  std::vector<std::string> errors;

  std::vector<std::jthread> pool;
  for (int a = 0; a < actors; ++a) {
    pool.emplace_back([&, a] {
      std::mt19937_64 rng(detail::mix_seed(config.seed, 2 + a));
      try {
        while (!stop.load()) {
          std::shared_ptr<const PolicyParams> params;
          {
            std::lock_guard lock(snapshot_mu);
            params = snapshot;
          }
          Batch b{a, detail::draw_batch(topo, fr, states, slices[a], *params,
                                        config.batch_size, config.k, rng)};
          if (!channel.push(std::move(b))) break;
        }
      } catch (const std::exception& e) {
        std::lock_guard lock(error_mu);
        errors.push_back("actor " + std::to_string(a) + " failed: " + e.what());
      }
      channel.producer_exited();
    });
  }
  auto shutdown = [&] {
    stop = true;
    channel.close();
    pool.clear();  // joins
    std::lock_guard lock(error_mu);
    for (auto& e : errors) result.warnings.push_back(e);
  };
  try {
    while (it < config.total_iterations) {
      const auto t0 = std::chrono::steady_clock::now();
      std::optional<Batch> b = channel.pop();
      if (!b) throw Error("all actors failed");
      learn(b->samples, b->actor, t0);
      auto next = std::make_shared<const PolicyParams>(result.params);
      std::lock_guard lock(snapshot_mu);
      snapshot = std::move(next);
    }
  } catch (...) {
    shutdown();
    throw;
  }
  shutdown();
  return result;
}

// Serial when actor_count == 1, actor/learner otherwise.
inline TrainResult train(const Topology& topo, const std::vector<TrainingState>& states,
                         const TrainerConfig& config, const TrainHooks& hooks = {}) {
  return config.actor_count == 1 ? train_serial(topo, states, config, hooks)
                                 : train_parallel(topo, states, config, hooks);
}

inline void write_training_log(const std::vector<IterationLog>& log, std::ostream& out,
                               bool include_timing = true) {
  out << "iteration,mean_reward,mean_entropy,alpha,wall_ms\n";
  char buf[160];
  for (const IterationLog& l : log) {
    std::snprintf(buf, sizeof buf, "%ld,%.17g,%.17g,%.17g,%.3f\n", l.iteration,
                  l.mean_reward, l.mean_entropy, l.alpha, include_timing ? l.wall_ms : 0.0);
    out << buf;
  }
}

inline void write_experiences(const std::vector<Experience>& exps, std::ostream& out) {
  out << "iteration,actor,state,reward,baseline,advantage,actions\n";
  char buf[160];
  for (const Experience& e : exps) {
    std::snprintf(buf, sizeof buf, "%ld,%d,%lld,%.17g,%.17g,%.17g,", e.iteration, e.actor,
                  static_cast<long long>(e.state), e.reward, e.baseline, e.advantage);
    out << buf;
    for (size_t i = 0; i < e.actions.size(); ++i) out << (i ? " " : "") << e.actions[i];
    out << '\n';
  }
}

inline std::vector<Experience> read_experiences(std::istream& in) {
  std::vector<Experience> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cols.push_back(cell);
    if (cols.size() != 7) throw ParseError("expected 7 columns", line_no);
    Experience e;
    try {
      e.iteration = std::stol(cols[0]);
      e.actor = std::stoi(cols[1]);
      e.state = std::stoll(cols[2]);
      e.reward = std::stod(cols[3]);
      e.baseline = std::stod(cols[4]);
      e.advantage = std::stod(cols[5]);
    } catch (const std::exception&) {
      throw ParseError("bad numeric field", line_no);
    }
    std::stringstream acts(cols[6]);
    int a;
    while (acts >> a) e.actions.push_back(a);
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace cfr
