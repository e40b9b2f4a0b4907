#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "affiltest/grid.hpp"
#include "affiltest/symmetry.hpp"

namespace affiltest {

enum class ConstraintMode { kAdjacent, kFull };

std::string_view to_string(ConstraintMode mode);
ConstraintMode parse_constraint_mode(std::string_view text);

struct RowEntry {
  std::size_t id;  // cell linear index or orbit id, depending on the row
  double coef;
  friend bool operator==(const RowEntry&, const RowEntry&) = default;
};

/// One TP2 inequality P(join) P(meet) >= P(i) P(i'), or in logs
/// log_row . log P >= 0.
struct Tp2Constraint {
  CellIndex i;
  CellIndex i_prime;
  CellIndex join;
  CellIndex meet;
  std::vector<RowEntry> log_row;    // over cell linear indices
  std::vector<RowEntry> orbit_row;  // over orbit ids (coefficients merged)
};

struct ConstraintSet {
  int intervals = 0;
  int bidders = 0;
  ConstraintMode mode = ConstraintMode::kAdjacent;
  bool symmetric = true;
  std::vector<Tp2Constraint> constraints;

  std::size_t size() const { return constraints.size(); }

  /// J x M matrix of orbit rows.
  Eigen::MatrixXd orbit_matrix(std::size_t num_orbits) const;
};

/// Componentwise (max, min). Throws kDimensionMismatch on unequal lengths.
std::pair<CellIndex, CellIndex> join_meet(std::span<const int> a, std::span<const int> b);

/// True when neither index dominates the other.
bool incomparable(std::span<const int> a, std::span<const int> b);

/// TP2 constraints over a k^N grid.
///
/// kFull emits one constraint per incomparable unordered pair of cells.
/// kAdjacent emits only the adjacent 2x2 minors, pairs (m + e_a, m + e_b)
/// for distinct axes a, b; these imply the full set for strictly positive
/// arrays. With `symmetric`, constraints whose orbit rows coincide are kept
/// once (first occurrence in cell order) and rows that vanish are dropped.
ConstraintSet generate(int k, int n, ConstraintMode mode, bool symmetric);

/// log form where all four cells are positive, product-form gap otherwise.
double residual(const CellArray& p, const Tp2Constraint& c);
std::vector<double> residuals(const CellArray& p, const ConstraintSet& cs);

struct Violation {
  std::size_t constraint;
  double residual;
};

std::vector<Violation> check(const CellArray& p, const ConstraintSet& cs, double tol = 1e-10);

/// Tab-separated audit dump: one line per constraint with the four cells,
/// the cell row and the orbit row as `id:coef` lists.
void write_constraints(std::ostream& os, const ConstraintSet& cs);

}  // namespace affiltest
