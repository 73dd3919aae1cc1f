#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "cfr/error.hpp"
#include "cfr/policy.hpp"

namespace cfr {

// Per-state running reward sum and visit count; b(s) = v[s] / n[s].
class BaselineTable {
 public:
  // 0 for states never recorded.
  double baseline(std::int64_t state) const {
    auto it = entries_.find(state);
    if (it == entries_.end() || it->second.count == 0) return 0.0;
    return it->second.sum / static_cast<double>(it->second.count);
  }

  void record(std::int64_t state, double reward) {
    Entry& e = entries_[state];
    e.sum += reward;
    ++e.count;
  }

  struct Entry {
    double sum = 0.0;
    std::uint64_t count = 0;
    friend bool operator==(const Entry&, const Entry&) = default;
  };

  const std::map<std::int64_t, Entry>& entries() const { return entries_; }
  void set(std::int64_t state, Entry e) { entries_[state] = e; }

  friend bool operator==(const BaselineTable&, const BaselineTable&) = default;

 private:
  std::map<std::int64_t, Entry> entries_;
};

// Everything needed to resume or replay training. Binary layout (little
// endian) is documented in docs/checkpoint_format.md.
struct Checkpoint {
  PolicyParams params;
  std::uint64_t iteration = 0;
  BaselineTable baseline;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

inline constexpr char kCheckpointMagic[8] = {'C', 'F', 'R', 'P', 'O', 'L', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T)))
    throw ParseError("truncated checkpoint", 0);
  return v;
}

}  // namespace detail

inline void write_checkpoint(const Checkpoint& ck, std::ostream& out) {
  using detail::put;
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  const PolicyShape& s = ck.params.shape;
  put<std::int32_t>(out, s.nodes);
  put<std::int32_t>(out, s.filters);
  put<std::int32_t>(out, s.hidden);
  put<std::int32_t>(out, kKernelSize);
  put<std::uint64_t>(out, ck.iteration);
  put<std::uint64_t>(out, ck.baseline.entries().size());
  for (const auto& [state, e] : ck.baseline.entries()) {
    put<std::int64_t>(out, state);
    put<double>(out, e.sum);
    put<std::uint64_t>(out, e.count);
  }
  for (const auto* g : ck.params.groups()) {
    put<std::uint64_t>(out, g->size());
    out.write(reinterpret_cast<const char*>(g->data()),
              static_cast<std::streamsize>(g->size() * sizeof(double)));
  }
  if (!out) throw Error("failed writing checkpoint");
}

inline Checkpoint read_checkpoint(std::istream& in) {
  using detail::get;
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw ParseError("not a policy checkpoint", 0);
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion)
    throw ParseError("unsupported checkpoint version " + std::to_string(version), 0);
  PolicyShape s;
  s.nodes = get<std::int32_t>(in);
  s.filters = get<std::int32_t>(in);
  s.hidden = get<std::int32_t>(in);
  if (get<std::int32_t>(in) != kKernelSize) throw ParseError("unsupported kernel size", 0);
  Checkpoint ck;
  ck.params = PolicyParams::zeros(s);
  ck.iteration = get<std::uint64_t>(in);
  const auto entries = get<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < entries; ++i) {
    const auto state = get<std::int64_t>(in);
    BaselineTable::Entry e;
    e.sum = get<double>(in);
    e.count = get<std::uint64_t>(in);
    ck.baseline.set(state, e);
  }
  for (auto* g : ck.params.groups()) {
    const auto count = get<std::uint64_t>(in);
    if (count != g->size()) throw ParseError("tensor size does not match shape", 0);
    if (!in.read(reinterpret_cast<char*>(g->data()),
                 static_cast<std::streamsize>(count * sizeof(double))))
      throw ParseError("truncated checkpoint", 0);
  }
  return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint: " + path);
  write_checkpoint(ck, out);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint: " + path);
  return read_checkpoint(in);
}

}  // namespace cfr
