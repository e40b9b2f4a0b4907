#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "affiltest/grid.hpp"

namespace affiltest {

/// Cell index with nonincreasing coordinates; the canonical member of its
/// permutation orbit.
using SortedIndex = std::vector<int>;

SortedIndex canonicalize(std::span<const int> index);

/// N! / (r_1! ... r_l!) where r are the repetition counts of the entries.
std::uint64_t orbit_size(std::span<const int> sorted);

/// Number of sorted indices of length n with entries in {1..j}, i.e.
/// C(n + j - 1, j - 1). num(0, n) is 0. Throws kInvalidArgument for
/// negative j or n < 1 and kOutOfRange when the value does not fit in 64 bits.
std::uint64_t num(int j, int n);

/// 1-based position of `sorted` in the ascending lexicographic enumeration
/// of sorted indices of its length: (1,1,1) -> 1, (2,1,1) -> 2, (2,2,1) -> 3.
std::uint64_t lex_rank(std::span<const int> sorted);
SortedIndex lex_unrank(std::uint64_t rank, int length);

/// Orbit representatives of the symmetric parameterization over a k^N grid.
struct OrbitModel {
  int intervals = 0;
  int bidders = 0;
  std::vector<SortedIndex> representatives;  // lex order; id = lex_rank - 1
  std::vector<std::uint64_t> sizes;

  std::size_t size() const { return representatives.size(); }

  /// Orbit id of any (not necessarily sorted) cell index.
  std::size_t orbit_of(std::span<const int> index) const;
};

OrbitModel enumerate_orbits(int k, int n);

/// Per-orbit totals of a cell array (aligned with model.representatives).
std::vector<double> symmetrize(const CellArray& counts, const OrbitModel& model);

/// Expands per-orbit cell values (the value every member cell takes) to a
/// full array.
CellArray expand_orbits(std::span<const double> orbit_values, const OrbitModel& model,
                        const GridSpec& grid, CellKind kind);

}  // namespace affiltest
