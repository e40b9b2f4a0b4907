#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace affiltest {

/// Cell index: one 1-based interval number per bidder.
using CellIndex = std::vector<int>;

/// A tuple of normalized observations, one per bidder, each in [0,1].
using Tuple = std::vector<double>;

/// Rectangular partition of [0,1]^N. Every coordinate uses the same
/// breakpoints 0 = r_0 < r_1 < ... < r_k = 1; interval j is (r_{j-1}, r_j]
/// with 0 attached to interval 1.
class GridSpec {
 public:
  GridSpec(std::vector<double> breakpoints, int bidders);

  static GridSpec equispaced(int intervals, int bidders);

  int intervals() const { return static_cast<int>(breakpoints_.size()) - 1; }
  int bidders() const { return bidders_; }
  std::span<const double> breakpoints() const { return breakpoints_; }

  /// Width of interval j (1-based).
  double width(int j) const { return breakpoints_[j] - breakpoints_[j - 1]; }
  bool is_equispaced(double tol = 1e-12) const;

  /// k^N.
  std::size_t num_cells() const { return num_cells_; }

  /// Row-major linear position of a cell, first bidder most significant.
  std::size_t linear(std::span<const int> index) const;
  CellIndex index(std::size_t linear) const;
  bool valid(std::span<const int> index) const;

  friend bool operator==(const GridSpec&, const GridSpec&) = default;

 private:
  std::vector<double> breakpoints_;
  int bidders_;
  std::size_t num_cells_;
};

enum class CellKind { kCounts, kMass, kHeight };

/// Dense array over all k^N cells of a grid, holding counts, masses or
/// density heights.
class CellArray {
 public:
  CellArray(GridSpec grid, CellKind kind);
  CellArray(GridSpec grid, CellKind kind, std::vector<double> values);

  const GridSpec& grid() const { return grid_; }
  CellKind kind() const { return kind_; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  std::size_t size() const { return values_.size(); }

  double operator[](std::size_t linear) const { return values_[linear]; }
  double& operator[](std::size_t linear) { return values_[linear]; }
  double at(std::span<const int> index) const { return values_[grid_.linear(index)]; }
  double& at(std::span<const int> index) { return values_[grid_.linear(index)]; }

  double total() const;

 private:
  GridSpec grid_;
  CellKind kind_;
  std::vector<double> values_;
};

/// Min-max normalization onto [0,1]. Throws kDegenerateSample when all
/// values coincide.
std::vector<double> normalize(std::span<const double> values);

/// Interval number of u in {1..k}. Throws kOutOfRange outside [0,1].
int bin(double u, const GridSpec& grid);

/// Multinomial cell counts of the tuples. Throws kEmptySample for an empty
/// input and kDimensionMismatch for tuples whose length differs from N.
CellArray count_cells(std::span<const Tuple> tuples, const GridSpec& grid);

double cell_volume(std::span<const int> index, const GridSpec& grid);

using Density = std::function<double(std::span<const double>)>;

/// Cell averages of a density on [0,1]^N, computed with the midpoint rule
/// on a subgrid of `subgrid_resolution` points per axis inside every cell.
/// The result is rescaled so that sum(height * volume) == 1.
///
/// Throws kInvalidDensity when f is negative at a quadrature node or when
/// its integral differs from 1 by more than `integral_tol`.
CellArray discretize_density(const Density& f, const GridSpec& grid,
                             int subgrid_resolution = 32,
                             double integral_tol = 1e-3);

CellArray mass_from_height(const CellArray& heights);
CellArray height_from_mass(const CellArray& masses);

}  // namespace affiltest
