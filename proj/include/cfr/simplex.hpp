#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "cfr/error.hpp"

namespace cfr {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class Relation { kLessEqual, kEqual, kGreaterEqual };

struct LpTerm {
  int var;
  double coef;
};

struct LpRow {
  std::vector<LpTerm> terms;
  Relation relation = Relation::kLessEqual;
  double rhs = 0.0;
  std::string name;
};

// min c'x  s.t.  rows,  lower <= x <= upper.
struct LpProblem {
  std::vector<double> objective;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<std::string> names;
  std::vector<LpRow> rows;

  int variable_count() const { return static_cast<int>(objective.size()); }
  int row_count() const { return static_cast<int>(rows.size()); }

  int add_variable(double cost, double lo, double hi, std::string name = "") {
    objective.push_back(cost);
    lower.push_back(lo);
    upper.push_back(hi);
    names.push_back(std::move(name));
    return variable_count() - 1;
  }

  int add_row(std::vector<LpTerm> terms, Relation rel, double rhs, std::string name = "") {
    rows.push_back({std::move(terms), rel, rhs, std::move(name)});
    return row_count() - 1;
  }

  void validate() const {
    const size_t n = objective.size();
    if (lower.size() != n || upper.size() != n)
      throw ValidationError("LP bound vectors do not match variable count");
    for (size_t j = 0; j < n; ++j) {
      if (std::isnan(lower[j]) || std::isnan(upper[j]) || lower[j] > upper[j])
        throw ValidationError("LP variable " + std::to_string(j) + " has lower > upper");
      if (!std::isfinite(objective[j]))
        throw ValidationError("LP objective coefficient must be finite");
    }
    for (const LpRow& row : rows) {
      if (!std::isfinite(row.rhs)) throw ValidationError("LP rhs must be finite");
      for (const LpTerm& t : row.terms) {
        if (t.var < 0 || t.var >= static_cast<int>(n))
          throw ValidationError("LP row references unknown variable");
        if (!std::isfinite(t.coef)) throw ValidationError("LP coefficient must be finite");
      }
    }
  }
};

struct LpSolution {
  std::vector<double> values;
  double objective = 0.0;
  int iterations = 0;
};

struct SimplexOptions {
  int max_iterations = 0;  // 0 picks a size-dependent limit
  int bland_after_degenerate = 1000;
  int refactor_every = 100;
  double feasibility_tol = 1e-9;
  double optimality_tol = 1e-9;
  double pivot_tol = 1e-9;
  double phase1_tol = 1e-7;
};

class LpError : public Error {
 public:
  LpError(const std::string& what, int iterations, std::vector<int> basis = {})
      : Error(what), iterations_(iterations), basis_(std::move(basis)) {}
  int iterations() const { return iterations_; }
  // Column indices of the basis when the solve stopped (structural columns
  // first, then one slack per inequality row, then one artificial per row).
  const std::vector<int>& basis() const { return basis_; }

 private:
  int iterations_;
  std::vector<int> basis_;
};

class LpInfeasible : public LpError {
 public:
  using LpError::LpError;
};

class LpUnbounded : public LpError {
 public:
  using LpError::LpError;
};

class LpIterationLimit : public LpError {
 public:
  using LpError::LpError;
};

namespace detail {

// Bounded-variable revised simplex over a dense explicit basis inverse.
class RevisedSimplex {
 public:
  RevisedSimplex(const LpProblem& p, const SimplexOptions& opt) : opt_(opt) {
    p.validate();
    m_ = p.row_count();
    n_struct_ = p.variable_count();
    cols_.assign(n_struct_, {});
    for (int i = 0; i < m_; ++i) {
      for (const LpTerm& t : p.rows[i].terms) {
        if (t.coef != 0.0) cols_[t.var].push_back({i, t.coef});
      }
    }
    lo_ = p.lower;
    hi_ = p.upper;
    cost_ = p.objective;
    b_.resize(m_);
    slack_of_row_.assign(m_, -1);
    for (int i = 0; i < m_; ++i) {
      b_[i] = p.rows[i].rhs;
      if (p.rows[i].relation == Relation::kEqual) continue;
      const double sign = p.rows[i].relation == Relation::kLessEqual ? 1.0 : -1.0;
      slack_of_row_[i] = add_column({{i, sign}}, 0.0, kInfinity, 0.0);
    }
    first_artificial_ = static_cast<int>(cols_.size());
    for (int i = 0; i < m_; ++i) add_column({{i, 1.0}}, 0.0, kInfinity, 0.0);

    max_iterations_ = opt_.max_iterations > 0
                          ? opt_.max_iterations
                          : 50 * (m_ + static_cast<int>(cols_.size())) + 1000;
  }

  LpSolution solve() {
    initial_basis();
    // Phase 1: drive artificials to zero.
    std::vector<double> phase1(cols_.size(), 0.0);
    double infeasibility = 0.0;
    for (int j = first_artificial_; j < num_cols(); ++j) {
      phase1[j] = 1.0;
      infeasibility += x_[j];
    }
    if (infeasibility > 0.0) {
      run(phase1);
      infeasibility = 0.0;
      for (int j = first_artificial_; j < num_cols(); ++j) infeasibility += x_[j];
      if (infeasibility > opt_.phase1_tol)
        throw LpInfeasible("LP infeasible (phase 1 residual " +
                               std::to_string(infeasibility) + ")",
                           iterations_, basis_);
    }
    for (int j = first_artificial_; j < num_cols(); ++j) {
      hi_[j] = 0.0;
      if (!is_basic(j)) x_[j] = 0.0;
    }
    // Phase 2.
    std::vector<double> phase2(cols_.size(), 0.0);
    std::copy(cost_.begin(), cost_.end(), phase2.begin());
    run(phase2);
    refactor();

    LpSolution sol;
    sol.values.assign(x_.begin(), x_.begin() + n_struct_);
    for (int j = 0; j < n_struct_; ++j)
      sol.values[j] = std::clamp(sol.values[j], lo_[j], hi_[j]);
    sol.objective = 0.0;
    for (int j = 0; j < n_struct_; ++j) sol.objective += cost_[j] * sol.values[j];
    sol.iterations = iterations_;
    return sol;
  }

 private:
  struct Entry {
    int row;
    double coef;
  };

  int num_cols() const { return static_cast<int>(cols_.size()); }
  bool is_basic(int j) const { return position_[j] >= 0; }

  int add_column(std::vector<Entry> col, double lo, double hi, double cost) {
    cols_.push_back(std::move(col));
    lo_.push_back(lo);
    hi_.push_back(hi);
    cost_.push_back(cost);
    return num_cols() - 1;
  }

  void initial_basis() {
    const int n = num_cols();
    x_.assign(n, 0.0);
    position_.assign(n, -1);
    basis_.assign(m_, -1);
    for (int j = 0; j < first_artificial_; ++j) {
      if (std::isfinite(lo_[j]))
        x_[j] = lo_[j];
      else if (std::isfinite(hi_[j]))
        x_[j] = hi_[j];
      else
        x_[j] = 0.0;
    }
    std::vector<double> residual = b_;
    for (int j = 0; j < first_artificial_; ++j) {
      if (x_[j] == 0.0) continue;
      for (const Entry& en : cols_[j]) residual[en.row] -= en.coef * x_[j];
    }
    binv_ = Eigen::MatrixXd::Zero(m_, m_);
    for (int i = 0; i < m_; ++i) {
      const int slack = slack_of_row_[i];
      const double r = residual[i];
      int basic;
      double coef;
      if (slack >= 0 && r * cols_[slack][0].coef >= 0.0) {
        basic = slack;
        coef = cols_[slack][0].coef;
        hi_[first_artificial_ + i] = 0.0;
      } else {
        basic = first_artificial_ + i;
        coef = r >= 0.0 ? 1.0 : -1.0;
        cols_[basic][0].coef = coef;
      }
      x_[basic] = r / coef;
      basis_[i] = basic;
      position_[basic] = i;
      binv_(i, i) = 1.0 / coef;
    }
  }

  void refactor() {
    if (m_ == 0) return;
    Eigen::MatrixXd basis_matrix = Eigen::MatrixXd::Zero(m_, m_);
    for (int i = 0; i < m_; ++i) {
      for (const Entry& en : cols_[basis_[i]]) basis_matrix(en.row, i) = en.coef;
    }
    binv_ = basis_matrix.partialPivLu().inverse();
    Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(b_.data(), m_);
    for (int j = 0; j < num_cols(); ++j) {
      if (is_basic(j) || x_[j] == 0.0) continue;
      for (const Entry& en : cols_[j]) rhs(en.row) -= en.coef * x_[j];
    }
    Eigen::VectorXd xb = binv_ * rhs;
    for (int i = 0; i < m_; ++i) x_[basis_[i]] = xb(i);
    pivots_since_refactor_ = 0;
  }

  void run(const std::vector<double>& c) {
    const int n = num_cols();
    int degenerate_streak = 0;
    bool bland = false;
    Eigen::VectorXd cb(m_), y(m_), alpha(m_);
    std::vector<double> d(n);
    for (;;) {
      if (iterations_ >= max_iterations_)
        throw LpIterationLimit("simplex iteration limit reached", iterations_, basis_);
      for (int i = 0; i < m_; ++i) cb(i) = c[basis_[i]];
      y.noalias() = binv_.transpose() * cb;

      int entering = -1;
      double best = 0.0;
      for (int j = 0; j < n; ++j) {
        if (is_basic(j) || lo_[j] == hi_[j]) continue;
        double dj = c[j];
        for (const Entry& en : cols_[j]) dj -= y(en.row) * en.coef;
        d[j] = dj;
        const bool at_lower = std::isfinite(lo_[j]) && x_[j] <= lo_[j];
        const bool at_upper = std::isfinite(hi_[j]) && x_[j] >= hi_[j];
        bool eligible;
        if (at_lower)
          eligible = dj < -opt_.optimality_tol;
        else if (at_upper)
          eligible = dj > opt_.optimality_tol;
        else
          eligible = std::abs(dj) > opt_.optimality_tol;
        if (!eligible) continue;
        if (bland) {
          entering = j;
          break;
        }
        if (std::abs(dj) > best) {
          best = std::abs(dj);
          entering = j;
        }
      }
      if (entering < 0) return;

      const double dir = d[entering] < 0.0 ? 1.0 : -1.0;
      alpha.setZero();
      for (const Entry& en : cols_[entering]) alpha.noalias() += en.coef * binv_.col(en.row);

      // Harris two-pass ratio test. Basic i moves by -dir * alpha_i per unit step.
      double relaxed = kInfinity;
      for (int i = 0; i < m_; ++i) {
        const double delta = -dir * alpha(i);
        const int j = basis_[i];
        if (delta < -opt_.pivot_tol) {
          if (std::isfinite(lo_[j]))
            relaxed = std::min(relaxed, (x_[j] - lo_[j] + opt_.feasibility_tol) / -delta);
        } else if (delta > opt_.pivot_tol) {
          if (std::isfinite(hi_[j]))
            relaxed = std::min(relaxed, (hi_[j] - x_[j] + opt_.feasibility_tol) / delta);
        }
      }
      relaxed = std::max(relaxed, 0.0);
      int leave = -1;
      double step = kInfinity;
      double best_pivot = 0.0;
      for (int i = 0; i < m_; ++i) {
        const double delta = -dir * alpha(i);
        const int j = basis_[i];
        double limit;
        if (delta < -opt_.pivot_tol && std::isfinite(lo_[j]))
          limit = (x_[j] - lo_[j]) / -delta;
        else if (delta > opt_.pivot_tol && std::isfinite(hi_[j]))
          limit = (hi_[j] - x_[j]) / delta;
        else
          continue;
        if (limit > relaxed) continue;
        limit = std::max(limit, 0.0);
        bool take;
        if (bland)
          take = leave < 0 || limit < step - 1e-12 ||
                 (limit <= step + 1e-12 && j < basis_[leave]);
        else
          take = std::abs(delta) > best_pivot;
        if (take) {
          leave = i;
          step = limit;
          best_pivot = std::abs(delta);
        }
      }
      const double flip = dir > 0.0 ? hi_[entering] - x_[entering] : x_[entering] - lo_[entering];
      ++iterations_;
      if (std::isfinite(flip) && flip <= step) {
        // Bound flip; the basis is unchanged.
        x_[entering] = dir > 0.0 ? hi_[entering] : lo_[entering];
        for (int i = 0; i < m_; ++i) x_[basis_[i]] -= dir * alpha(i) * flip;
        degenerate_streak = 0;
        bland = false;
        continue;
      }
      if (leave < 0)
        throw LpUnbounded("LP unbounded", iterations_, basis_);

      x_[entering] += dir * step;
      for (int i = 0; i < m_; ++i) x_[basis_[i]] -= dir * alpha(i) * step;
      const int leaving = basis_[leave];
      const double delta = -dir * alpha(leave);
      x_[leaving] = delta < 0.0 ? lo_[leaving] : hi_[leaving];

      const double pivot = alpha(leave);
      Eigen::RowVectorXd pivot_row = binv_.row(leave) / pivot;
      alpha(leave) -= 1.0;
      binv_.noalias() -= alpha * pivot_row;

      position_[leaving] = -1;
      position_[entering] = leave;
      basis_[leave] = entering;

      if (step <= 1e-12) {
        if (++degenerate_streak >= opt_.bland_after_degenerate) bland = true;
      } else {
        degenerate_streak = 0;
        bland = false;
      }
      if (++pivots_since_refactor_ >= opt_.refactor_every) refactor();
    }
  }

  SimplexOptions opt_;
  int m_ = 0;
  int n_struct_ = 0;
  int first_artificial_ = 0;
  int max_iterations_ = 0;
  int iterations_ = 0;
  int pivots_since_refactor_ = 0;
  std::vector<std::vector<Entry>> cols_;
  std::vector<double> lo_, hi_, cost_, b_, x_;
  std::vector<int> slack_of_row_;
  std::vector<int> basis_;     // row position -> column
  std::vector<int> position_;  // column -> row position, -1 if nonbasic
  Eigen::MatrixXd binv_;
};

}  // namespace detail

// Optimal basic solution of `problem`. Throws LpInfeasible, LpUnbounded or
// LpIterationLimit.
inline LpSolution solve_lp(const LpProblem& problem, const SimplexOptions& options = {}) {
  detail::RevisedSimplex simplex(problem, options);
  return simplex.solve();
}

// CPLEX LP text format, for cross-checking with external solvers.
inline void write_lp_format(const LpProblem& p, std::ostream& out) {
  auto var_name = [&](int j) {
    return (j < static_cast<int>(p.names.size()) && !p.names[j].empty())
               ? p.names[j]
               : "x" + std::to_string(j);
  };
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v + 0.0);  // no "-0"
    return std::string(buf);
  };
  auto write_terms = [&](const std::vector<std::pair<int, double>>& terms) {
    if (terms.empty()) {
      out << " 0 " << var_name(0);
      return;
    }
    // Readers cap line length, so wrap every few terms.
    for (size_t i = 0; i < terms.size(); ++i) {
      const auto& [j, c] = terms[i];
      if (i > 0 && i % 6 == 0) out << "\n   ";
      out << (c < 0 ? " - " : " + ") << num(std::abs(c)) << " " << var_name(j);
    }
  };
  out << "\\ written by cfr\nMinimize\n obj:";
  std::vector<std::pair<int, double>> obj;
  for (int j = 0; j < p.variable_count(); ++j) {
    if (p.objective[j] != 0.0) obj.emplace_back(j, p.objective[j]);
  }
  write_terms(obj);
  out << "\nSubject To\n";
  for (int i = 0; i < p.row_count(); ++i) {
    const LpRow& row = p.rows[i];
    out << " " << (row.name.empty() ? "c" + std::to_string(i) : row.name) << ":";
    std::vector<std::pair<int, double>> terms;
    for (const LpTerm& t : row.terms) terms.emplace_back(t.var, t.coef);
    write_terms(terms);
    out << (row.relation == Relation::kLessEqual
                ? " <= "
                : row.relation == Relation::kEqual ? " = " : " >= ")
        << num(row.rhs) << "\n";
  }
  out << "Bounds\n";
  for (int j = 0; j < p.variable_count(); ++j) {
    const double lo = p.lower[j], hi = p.upper[j];
    if (!std::isfinite(lo) && !std::isfinite(hi)) {
      out << " " << var_name(j) << " free\n";
      continue;
    }
    out << " " << (std::isfinite(lo) ? num(lo) : "-inf") << " <= " << var_name(j)
        << " <= " << (std::isfinite(hi) ? num(hi) : "+inf") << "\n";
  }
  out << "End\n";
}

}  // namespace cfr
