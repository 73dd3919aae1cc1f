#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "cfr/error.hpp"

namespace cfr {

// N x N demand matrix, row-major. Diagonal is always zero.
class TrafficMatrix {
 public:
  TrafficMatrix() = default;
  explicit TrafficMatrix(int n, std::string id = "")
      : n_(n), demand_(static_cast<size_t>(n) * n, 0.0), id_(std::move(id)) {}
  TrafficMatrix(int n, std::vector<double> demand, std::string id = "")
      : n_(n), demand_(std::move(demand)), id_(std::move(id)) {
    if (demand_.size() != static_cast<size_t>(n) * n)
      throw ValidationError("traffic matrix needs N*N entries");
    for (int i = 0; i < n_; ++i) {
      if (demand_[i * n_ + i] != 0.0)
        throw ValidationError("traffic matrix diagonal must be zero");
    }
    for (double v : demand_) {
      if (!(v >= 0.0) || !std::isfinite(v))
        throw ValidationError("demands must be finite and non-negative");
    }
  }

  int n() const { return n_; }
  const std::string& id() const { return id_; }
  void set_id(std::string id) { id_ = std::move(id); }
  const std::vector<double>& data() const { return demand_; }

  double at(int src, int dst) const { return demand_[src * n_ + dst]; }
  void set(int src, int dst, double value) {
    if (src == dst) throw DomainError("cannot set a diagonal demand");
    if (!(value >= 0.0) || !std::isfinite(value))
      throw DomainError("demand must be finite and non-negative");
    demand_[src * n_ + dst] = value;
  }

  double total() const {
    double sum = 0.0;
    for (double v : demand_) sum += v;
    return sum;
  }
  double max_entry() const {
    double m = 0.0;
    for (double v : demand_) m = std::max(m, v);
    return m;
  }

  TrafficMatrix scaled(double factor) const {
    if (!(factor >= 0.0) || !std::isfinite(factor))
      throw DomainError("scale factor must be finite and non-negative");
    TrafficMatrix out = *this;
    for (double& v : out.demand_) v *= factor;
    return out;
  }

  friend bool operator==(const TrafficMatrix& a, const TrafficMatrix& b) {
    return a.n_ == b.n_ && a.demand_ == b.demand_;
  }

 private:
  int n_ = 0;
  std::vector<double> demand_;
  std::string id_;
};

// One matrix per line: optional "id:<name>" token then N*N values, row-major.
// Non-zero diagonal entries are zeroed and reported through `warnings`.
inline std::vector<TrafficMatrix> parse_tms(std::istream& in, int n,
                                            std::vector<std::string>* warnings = nullptr) {
  if (n < 2) throw DomainError("node count must be at least 2");
  std::vector<TrafficMatrix> out;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::istringstream line(raw);
    std::string token;
    std::vector<double> values;
    std::string id;
    bool first = true;
    while (line >> token) {
      if (first && token.rfind("id:", 0) == 0) {
        id = token.substr(3);
        first = false;
        continue;
      }
      first = false;
      try {
        size_t used = 0;
        double v = std::stod(token, &used);
        if (used != token.size()) throw std::invalid_argument(token);
        values.push_back(v);
      } catch (const std::exception&) {
        throw ParseError("bad demand value '" + token + "'", line_no);
      }
    }
    if (values.empty() && id.empty()) continue;
    if (values.size() != static_cast<size_t>(n) * n)
      throw ParseError("expected " + std::to_string(n * n) + " values, got " +
                           std::to_string(values.size()),
                       line_no);
    for (double v : values) {
      if (!std::isfinite(v)) throw ParseError("non-finite demand", line_no);
      if (v < 0.0) throw ParseError("negative demand", line_no);
    }
    for (int i = 0; i < n; ++i) {
      double& diag = values[i * n + i];
      if (diag != 0.0) {
        if (warnings)
          warnings->push_back("line " + std::to_string(line_no) +
                              ": non-zero diagonal at node " + std::to_string(i) +
                              " set to 0");
        diag = 0.0;
      }
    }
    if (id.empty()) id = std::to_string(out.size());
    out.emplace_back(n, std::move(values), id);
  }
  return out;
}

inline std::vector<TrafficMatrix> load_tms(const std::string& path, int n,
                                           std::vector<std::string>* warnings = nullptr) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open traffic matrix file: " + path);
  return parse_tms(in, n, warnings);
}

inline void write_tms(const std::vector<TrafficMatrix>& tms, std::ostream& out) {
  char buf[32];
  for (const TrafficMatrix& tm : tms) {
    if (!tm.id().empty()) out << "id:" << tm.id();
    bool first = tm.id().empty();
    for (double v : tm.data()) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      if (!first) out << ' ';
      out << buf;
      first = false;
    }
    out << '\n';
  }
}

}  // namespace cfr
