#include "affiltest/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "affiltest/error.hpp"

namespace affiltest {

GridSpec::GridSpec(std::vector<double> breakpoints, int bidders)
    : breakpoints_(std::move(breakpoints)), bidders_(bidders), num_cells_(1) {
  if (breakpoints_.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "grid needs at least one interval");
  }
  if (bidders_ < 2) {
    throw Error(ErrorCode::kInvalidArgument, "grid needs at least two bidders");
  }
  if (breakpoints_.front() != 0.0 || breakpoints_.back() != 1.0) {
    throw Error(ErrorCode::kInvalidArgument, "breakpoints must start at 0 and end at 1");
  }
  for (std::size_t j = 1; j < breakpoints_.size(); ++j) {
    if (!(breakpoints_[j - 1] < breakpoints_[j])) {
      throw Error(ErrorCode::kInvalidArgument, "breakpoints must be strictly increasing");
    }
  }
  const auto k = static_cast<std::size_t>(intervals());
  for (int n = 0; n < bidders_; ++n) {
    if (num_cells_ > (std::size_t{1} << 40) / k) {
      throw Error(ErrorCode::kInvalidArgument, "grid has too many cells");
    }
    num_cells_ *= k;
  }
}

GridSpec GridSpec::equispaced(int intervals, int bidders) {
  if (intervals < 1) {
    throw Error(ErrorCode::kInvalidArgument, "k must be at least 1");
  }
  std::vector<double> r(static_cast<std::size_t>(intervals) + 1);
  for (int j = 0; j <= intervals; ++j) r[j] = static_cast<double>(j) / intervals;
  r.back() = 1.0;
  return GridSpec(std::move(r), bidders);
}

bool GridSpec::is_equispaced(double tol) const {
  const double w = 1.0 / intervals();
  for (int j = 1; j <= intervals(); ++j) {
    if (std::abs(width(j) - w) > tol) return false;
  }
  return true;
}

bool GridSpec::valid(std::span<const int> index) const {
  if (static_cast<int>(index.size()) != bidders_) return false;
  return std::all_of(index.begin(), index.end(),
                     [k = intervals()](int i) { return i >= 1 && i <= k; });
}

std::size_t GridSpec::linear(std::span<const int> index) const {
  if (!valid(index)) {
    throw Error(ErrorCode::kOutOfRange, "cell index outside the grid");
  }
  const auto k = static_cast<std::size_t>(intervals());
  std::size_t pos = 0;
  for (int i : index) pos = pos * k + static_cast<std::size_t>(i - 1);
  return pos;
}

CellIndex GridSpec::index(std::size_t linear) const {
  const auto k = static_cast<std::size_t>(intervals());
  CellIndex out(static_cast<std::size_t>(bidders_));
  for (int n = bidders_ - 1; n >= 0; --n) {
    out[n] = static_cast<int>(linear % k) + 1;
    linear /= k;
  }
  return out;
}

CellArray::CellArray(GridSpec grid, CellKind kind)
    : grid_(std::move(grid)), kind_(kind), values_(grid_.num_cells(), 0.0) {}

CellArray::CellArray(GridSpec grid, CellKind kind, std::vector<double> values)
    : grid_(std::move(grid)), kind_(kind), values_(std::move(values)) {
  if (values_.size() != grid_.num_cells()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "cell array has " + std::to_string(values_.size()) + " values, grid has " +
                    std::to_string(grid_.num_cells()) + " cells");
  }
}

double CellArray::total() const {
  return std::accumulate(values_.begin(), values_.end(), 0.0);
}

std::vector<double> normalize(std::span<const double> values) {
  if (values.empty()) {
    throw Error(ErrorCode::kEmptySample, "cannot normalize an empty sample");
  }
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double min = *lo;
  const double range = *hi - *lo;
  if (!(range > 0.0)) {
    throw Error(ErrorCode::kDegenerateSample, "all values are identical; range is zero");
  }
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = std::clamp((values[i] - min) / range, 0.0, 1.0);
  }
  out[static_cast<std::size_t>(lo - values.begin())] = 0.0;
  out[static_cast<std::size_t>(hi - values.begin())] = 1.0;
  return out;
}

int bin(double u, const GridSpec& grid) {
  if (!(u >= 0.0 && u <= 1.0)) {
    throw Error(ErrorCode::kOutOfRange, "value " + std::to_string(u) + " outside [0,1]");
  }
  const auto r = grid.breakpoints();
  // First breakpoint >= u is r_j, so u lies in (r_{j-1}, r_j].
  const auto it = std::lower_bound(r.begin(), r.end(), u);
  return std::max(1, static_cast<int>(it - r.begin()));
}

CellArray count_cells(std::span<const Tuple> tuples, const GridSpec& grid) {
  if (tuples.empty()) {
    throw Error(ErrorCode::kEmptySample, "no tuples to count");
  }
  CellArray counts(grid, CellKind::kCounts);
  CellIndex idx(static_cast<std::size_t>(grid.bidders()));
  for (const auto& t : tuples) {
    if (static_cast<int>(t.size()) != grid.bidders()) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "tuple of length " + std::to_string(t.size()) + ", expected " +
                      std::to_string(grid.bidders()));
    }
    for (std::size_t n = 0; n < t.size(); ++n) idx[n] = bin(t[n], grid);
    counts.at(idx) += 1.0;
  }
  return counts;
}

double cell_volume(std::span<const int> index, const GridSpec& grid) {
  if (!grid.valid(index)) {
    throw Error(ErrorCode::kOutOfRange, "cell index outside the grid");
  }
  double v = 1.0;
  for (int i : index) v *= grid.width(i);
  return v;
}

CellArray discretize_density(const Density& f, const GridSpec& grid,
                             int subgrid_resolution, double integral_tol) {
  if (subgrid_resolution < 1) {
    throw Error(ErrorCode::kInvalidArgument, "subgrid resolution must be positive");
  }
  const int n_dim = grid.bidders();
  const auto r = grid.breakpoints();
  CellArray heights(grid, CellKind::kHeight);

  std::vector<int> sub(static_cast<std::size_t>(n_dim));
  std::vector<double> point(static_cast<std::size_t>(n_dim));
  const double nodes = std::pow(static_cast<double>(subgrid_resolution), n_dim);

  for (std::size_t c = 0; c < grid.num_cells(); ++c) {
    const CellIndex cell = grid.index(c);
    std::fill(sub.begin(), sub.end(), 0);
    double sum = 0.0;
    for (;;) {
      for (int n = 0; n < n_dim; ++n) {
        const int j = cell[n];
        point[n] = r[j - 1] + (sub[n] + 0.5) * (r[j] - r[j - 1]) / subgrid_resolution;
      }
      const double v = f(point);
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw Error(ErrorCode::kInvalidDensity, "density is negative or non-finite");
      }
      sum += v;
      int n = n_dim - 1;
      while (n >= 0 && ++sub[n] == subgrid_resolution) sub[n--] = 0;
      if (n < 0) break;
    }
    heights[c] = sum / nodes;
  }

  double integral = 0.0;
  for (std::size_t c = 0; c < grid.num_cells(); ++c) {
    integral += heights[c] * cell_volume(grid.index(c), grid);
  }
  if (!(std::abs(integral - 1.0) <= integral_tol)) {
    throw Error(ErrorCode::kInvalidDensity,
                "density integrates to " + std::to_string(integral) + ", not 1");
  }
  for (double& h : heights.values()) h /= integral;
  return heights;
}

CellArray mass_from_height(const CellArray& heights) {
  if (heights.kind() != CellKind::kHeight) {
    throw Error(ErrorCode::kInvalidArgument, "expected a height array");
  }
  CellArray out(heights.grid(), CellKind::kMass);
  for (std::size_t c = 0; c < out.size(); ++c) {
    out[c] = heights[c] * cell_volume(heights.grid().index(c), heights.grid());
  }
  return out;
}

CellArray height_from_mass(const CellArray& masses) {
  if (masses.kind() != CellKind::kMass) {
    throw Error(ErrorCode::kInvalidArgument, "expected a mass array");
  }
  CellArray out(masses.grid(), CellKind::kHeight);
  for (std::size_t c = 0; c < out.size(); ++c) {
    out[c] = masses[c] / cell_volume(masses.grid().index(c), masses.grid());
  }
  return out;
}

}  // namespace affiltest
