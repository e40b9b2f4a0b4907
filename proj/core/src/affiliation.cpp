#include "affiltest/affiliation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <string>

#include "affiltest/error.hpp"

namespace affiltest {

std::string_view to_string(ConstraintMode mode) {
  return mode == ConstraintMode::kAdjacent ? "adjacent" : "full";
}

ConstraintMode parse_constraint_mode(std::string_view text) {
  if (text == "adjacent") return ConstraintMode::kAdjacent;
  if (text == "full") return ConstraintMode::kFull;
  throw Error(ErrorCode::kConfig, "unknown constraint mode '" + std::string(text) + "'");
}

Eigen::MatrixXd ConstraintSet::orbit_matrix(std::size_t num_orbits) const {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(size()),
                                            static_cast<Eigen::Index>(num_orbits));
  for (std::size_t j = 0; j < size(); ++j) {
    for (const auto& e : constraints[j].orbit_row) {
      a(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(e.id)) = e.coef;
    }
  }
  return a;
}

std::pair<CellIndex, CellIndex> join_meet(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "join/meet of indices of different length");
  }
  CellIndex hi(a.size()), lo(a.size());
  for (std::size_t n = 0; n < a.size(); ++n) {
    hi[n] = std::max(a[n], b[n]);
    lo[n] = std::min(a[n], b[n]);
  }
  return {hi, lo};
}

bool incomparable(std::span<const int> a, std::span<const int> b) {
  bool above = false, below = false;
  for (std::size_t n = 0; n < a.size(); ++n) {
    above |= a[n] > b[n];
    below |= a[n] < b[n];
  }
  return above && below;
}

namespace {

std::vector<RowEntry> merge(std::map<std::size_t, double>& acc) {
  std::vector<RowEntry> row;
  for (const auto& [id, coef] : acc) {
    if (coef != 0.0) row.push_back({id, coef});
  }
  return row;
}

Tp2Constraint make_constraint(const GridSpec& grid, const OrbitModel& orbits, CellIndex a,
                              CellIndex b) {
  Tp2Constraint c;
  auto [hi, lo] = join_meet(a, b);
  c.i = std::move(a);
  c.i_prime = std::move(b);
  c.join = std::move(hi);
  c.meet = std::move(lo);

  std::map<std::size_t, double> cells, orbs;
  const std::pair<const CellIndex*, double> terms[] = {
      {&c.join, 1.0}, {&c.meet, 1.0}, {&c.i, -1.0}, {&c.i_prime, -1.0}};
  for (const auto& [idx, coef] : terms) {
    cells[grid.linear(*idx)] += coef;
    orbs[orbits.orbit_of(*idx)] += coef;
  }
  c.log_row = merge(cells);
  c.orbit_row = merge(orbs);
  return c;
}

}  // namespace

ConstraintSet generate(int k, int n, ConstraintMode mode, bool symmetric) {
  if (k < 1 || n < 2) {
    throw Error(ErrorCode::kInvalidArgument, "generate needs k >= 1 and N >= 2");
  }
  ConstraintSet cs;
  cs.intervals = k;
  cs.bidders = n;
  cs.mode = mode;
  cs.symmetric = symmetric;
  if (k == 1) return cs;

  const GridSpec grid = GridSpec::equispaced(k, n);
  const OrbitModel orbits = enumerate_orbits(k, n);

  std::vector<std::pair<CellIndex, CellIndex>> pairs;
  if (mode == ConstraintMode::kFull) {
    for (std::size_t x = 0; x < grid.num_cells(); ++x) {
      const CellIndex a = grid.index(x);
      for (std::size_t y = x + 1; y < grid.num_cells(); ++y) {
        CellIndex b = grid.index(y);
        if (incomparable(a, b)) pairs.emplace_back(a, std::move(b));
      }
    }
  } else {
    for (std::size_t x = 0; x < grid.num_cells(); ++x) {
      const CellIndex m = grid.index(x);
      for (int ax = 0; ax < n; ++ax) {
        if (m[ax] == k) continue;
        for (int bx = ax + 1; bx < n; ++bx) {
          if (m[bx] == k) continue;
          CellIndex a = m, b = m;
          ++a[ax];
          ++b[bx];
          pairs.emplace_back(std::move(a), std::move(b));
        }
      }
    }
  }

  std::vector<std::vector<RowEntry>> seen;
  for (auto& [a, b] : pairs) {
    Tp2Constraint c = make_constraint(grid, orbits, std::move(a), std::move(b));
    if (symmetric) {
      if (c.orbit_row.empty()) continue;
      if (std::find(seen.begin(), seen.end(), c.orbit_row) != seen.end()) continue;
      seen.push_back(c.orbit_row);
    }
    cs.constraints.push_back(std::move(c));
  }
  return cs;
}

double residual(const CellArray& p, const Tp2Constraint& c) {
  const double hi = p.at(c.join), lo = p.at(c.meet);
  const double a = p.at(c.i), b = p.at(c.i_prime);
  if (hi > 0.0 && lo > 0.0 && a > 0.0 && b > 0.0) {
    return std::log(hi) + std::log(lo) - std::log(a) - std::log(b);
  }
  return hi * lo - a * b;
}

std::vector<double> residuals(const CellArray& p, const ConstraintSet& cs) {
  if (p.grid().intervals() != cs.intervals || p.grid().bidders() != cs.bidders) {
    throw Error(ErrorCode::kDimensionMismatch, "constraint set does not match the array");
  }
  std::vector<double> out(cs.size());
  for (std::size_t j = 0; j < cs.size(); ++j) out[j] = residual(p, cs.constraints[j]);
  return out;
}

std::vector<Violation> check(const CellArray& p, const ConstraintSet& cs, double tol) {
  std::vector<Violation> out;
  const auto r = residuals(p, cs);
  for (std::size_t j = 0; j < r.size(); ++j) {
    if (r[j] < -tol) out.push_back({j, r[j]});
  }
  return out;
}

namespace {

std::string format_index(std::span<const int> idx) {
  std::string s = "(";
  for (std::size_t n = 0; n < idx.size(); ++n) {
    if (n) s += ',';
    s += std::to_string(idx[n]);
  }
  return s + ")";
}

std::string format_row(const std::vector<RowEntry>& row) {
  std::string s;
  for (const auto& e : row) {
    if (!s.empty()) s += ' ';
    s += std::to_string(e.id) + ':' + std::to_string(static_cast<int>(e.coef));
  }
  return s;
}

}  // namespace

void write_constraints(std::ostream& os, const ConstraintSet& cs) {
  os << "# k=" << cs.intervals << " N=" << cs.bidders << " mode=" << to_string(cs.mode)
     << " symmetric=" << (cs.symmetric ? "true" : "false") << " J=" << cs.size() << '\n';
  os << "id\ti\ti_prime\tjoin\tmeet\tcell_row\torbit_row\n";
  for (std::size_t j = 0; j < cs.size(); ++j) {
    const auto& c = cs.constraints[j];
    os << j << '\t' << format_index(c.i) << '\t' << format_index(c.i_prime) << '\t'
       << format_index(c.join) << '\t' << format_index(c.meet) << '\t'
       << format_row(c.log_row) << '\t' << format_row(c.orbit_row) << '\n';
  }
}

}  // namespace affiltest
