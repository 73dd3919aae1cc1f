#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cfr/error.hpp"

namespace cfr {

// Capacity used for cost-only topologies. Only utilization ratios matter.
inline constexpr double kDefaultCapacityScale = 1000.0;

struct Link {
  int src = 0;
  int dst = 0;
  double capacity = 0.0;
  double cost = 1.0;

  friend bool operator==(const Link&, const Link&) = default;
};

// Directed graph with per-link capacity and cost. Immutable once built; the
// constructor enforces every structural invariant.
class Topology {
 public:
  Topology(int node_count, std::vector<Link> links, std::string name = "")
      : node_count_(node_count), links_(std::move(links)), name_(std::move(name)) {
    validate();
    out_links_.assign(node_count_, {});
    in_links_.assign(node_count_, {});
    for (int e = 0; e < link_count(); ++e) {
      out_links_[links_[e].src].push_back(e);
      in_links_[links_[e].dst].push_back(e);
    }
  }

  int node_count() const { return node_count_; }
  int link_count() const { return static_cast<int>(links_.size()); }
  int flow_count() const { return node_count_ * (node_count_ - 1); }
  const std::string& name() const { return name_; }
  const std::vector<Link>& links() const { return links_; }
  const Link& link(int e) const { return links_[e]; }
  const std::vector<int>& out_links(int node) const { return out_links_[node]; }
  const std::vector<int>& in_links(int node) const { return in_links_[node]; }

  std::optional<int> find_link(int src, int dst) const {
    for (int e : out_links_[src]) {
      if (links_[e].dst == dst) return e;
    }
    return std::nullopt;
  }

  friend bool operator==(const Topology& a, const Topology& b) {
    return a.node_count_ == b.node_count_ && a.links_ == b.links_;
  }

 private:
  void validate() const {
    if (node_count_ < 2) throw ValidationError("topology needs at least 2 nodes");
    std::set<std::pair<int, int>> seen;
    for (const Link& l : links_) {
      const std::string where =
          "link " + std::to_string(l.src) + "->" + std::to_string(l.dst);
      if (l.src < 0 || l.src >= node_count_ || l.dst < 0 || l.dst >= node_count_)
        throw ValidationError(where + ": node id out of range");
      if (l.src == l.dst) throw ValidationError(where + ": self-loop");
      if (!seen.emplace(l.src, l.dst).second)
        throw ValidationError(where + ": duplicate link");
      if (!(l.capacity > 0.0) || !std::isfinite(l.capacity))
        throw ValidationError(where + ": capacity must be positive");
      if (!(l.cost > 0.0) || !std::isfinite(l.cost))
        throw ValidationError(where + ": cost must be positive");
    }
    if (!strongly_connected()) throw ValidationError("not strongly connected");
  }

  bool strongly_connected() const {
    auto reaches_all = [&](bool forward) {
      std::vector<std::vector<int>> adj(node_count_);
      for (const Link& l : links_) {
        if (forward)
          adj[l.src].push_back(l.dst);
        else
          adj[l.dst].push_back(l.src);
      }
      std::vector<bool> seen(node_count_, false);
      std::vector<int> stack{0};
      seen[0] = true;
      int count = 1;
      while (!stack.empty()) {
        int u = stack.back();
        stack.pop_back();
        for (int v : adj[u]) {
          if (!seen[v]) {
            seen[v] = true;
            ++count;
            stack.push_back(v);
          }
        }
      }
      return count == node_count_;
    };
    return reaches_all(true) && reaches_all(false);
  }

  int node_count_;
  std::vector<Link> links_;
  std::string name_;
  std::vector<std::vector<int>> out_links_;
  std::vector<std::vector<int>> in_links_;
};

// capacity = scale / cost on every link; costs are kept.
inline Topology infer_capacities_from_costs(const Topology& topo,
                                            double scale = kDefaultCapacityScale) {
  if (!(scale > 0.0)) throw DomainError("capacity scale must be positive");
  std::vector<Link> links = topo.links();
  for (Link& l : links) {
    if (!(l.cost > 0.0)) throw DomainError("link cost must be positive");
    l.capacity = scale / l.cost;
  }
  return Topology(topo.node_count(), std::move(links), topo.name());
}

// Action ids enumerate ordered pairs (s, d), s != d, row-major with the
// diagonal skipped.
inline int flow_index(int src, int dst, int node_count) {
  if (src < 0 || dst < 0 || src >= node_count || dst >= node_count)
    throw DomainError("flow endpoint out of range");
  if (src == dst) throw DomainError("flow endpoints must differ");
  return src * (node_count - 1) + (dst < src ? dst : dst - 1);
}

inline std::pair<int, int> flow_of_index(int action, int node_count) {
  if (action < 0 || action >= node_count * (node_count - 1))
    throw DomainError("flow index out of range: " + std::to_string(action));
  int src = action / (node_count - 1);
  int rem = action % (node_count - 1);
  return {src, rem < src ? rem : rem + 1};
}

// Text format:
//   nodes <N>
//   link <src> <dst> <capacity|-> <cost>
//   edge <a> <b> <capacity|-> <cost>     (expands to both directions)
// '#' starts a comment. A '-' capacity is inferred as scale / cost.
inline Topology parse_topology(std::istream& in, const std::string& name = "",
                               double capacity_scale = kDefaultCapacityScale) {
  int node_count = -1;
  std::vector<Link> links;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::istringstream line(raw);
    std::string keyword;
    if (!(line >> keyword)) continue;
    if (keyword == "nodes") {
      if (node_count >= 0) throw ParseError("duplicate 'nodes' header", line_no);
      if (!(line >> node_count) || node_count < 0)
        throw ParseError("expected 'nodes <N>'", line_no);
    } else if (keyword == "link" || keyword == "edge") {
      if (node_count < 0) throw ParseError("'nodes' header must come first", line_no);
      Link l;
      std::string capacity;
      if (!(line >> l.src >> l.dst >> capacity >> l.cost))
        throw ParseError("expected '" + keyword + " <src> <dst> <capacity> <cost>'",
                         line_no);
      if (capacity == "-") {
        if (!(l.cost > 0.0))
          throw ValidationError("line " + std::to_string(line_no) +
                                ": cannot infer capacity from non-positive cost");
        l.capacity = capacity_scale / l.cost;
      } else {
        try {
          size_t used = 0;
          l.capacity = std::stod(capacity, &used);
          if (used != capacity.size()) throw std::invalid_argument(capacity);
        } catch (const std::exception&) {
          throw ParseError("bad capacity '" + capacity + "'", line_no);
        }
      }
      links.push_back(l);
      if (keyword == "edge") links.push_back({l.dst, l.src, l.capacity, l.cost});
    } else {
      throw ParseError("unknown keyword '" + keyword + "'", line_no);
    }
    std::string extra;
    if (line >> extra) throw ParseError("trailing token '" + extra + "'", line_no);
  }
  if (node_count < 0) throw ParseError("missing 'nodes' header", 0);
  return Topology(node_count, std::move(links), name);
}

inline Topology load_topology(const std::string& path,
                              double capacity_scale = kDefaultCapacityScale) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open topology file: " + path);
  std::string name = path.substr(path.find_last_of('/') + 1);
  if (auto dot = name.rfind('.'); dot != std::string::npos) name.erase(dot);
  return parse_topology(in, name, capacity_scale);
}

inline void write_topology(const Topology& topo, std::ostream& out) {
  char buf[128];
  out << "nodes " << topo.node_count() << "\n";
  for (const Link& l : topo.links()) {
    std::snprintf(buf, sizeof buf, "link %d %d %.17g %.17g\n", l.src, l.dst,
                  l.capacity, l.cost);
    out << buf;
  }
}

}  // namespace cfr
