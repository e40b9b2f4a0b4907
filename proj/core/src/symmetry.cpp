#include "affiltest/symmetry.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <string>

#include "affiltest/error.hpp"

namespace affiltest {

SortedIndex canonicalize(std::span<const int> index) {
  SortedIndex s(index.begin(), index.end());
  std::sort(s.begin(), s.end(), std::greater<>());
  return s;
}

namespace {

__extension__ using Wide = unsigned __int128;

// C(n, r) with an overflow check on every partial product.
std::uint64_t binomial(int n, int r) {
  if (r < 0 || r > n) return 0;
  r = std::min(r, n - r);
  Wide c = 1;
  for (int i = 1; i <= r; ++i) {
    c = c * static_cast<unsigned>(n - r + i) / static_cast<unsigned>(i);
    if (c > std::numeric_limits<std::uint64_t>::max()) {
      throw Error(ErrorCode::kOutOfRange,
                  "C(" + std::to_string(n) + "," + std::to_string(r) + ") overflows 64 bits");
    }
  }
  return static_cast<std::uint64_t>(c);
}

void require_sorted(std::span<const int> s) {
  if (s.empty()) throw Error(ErrorCode::kInvalidArgument, "empty index");
  for (std::size_t n = 1; n < s.size(); ++n) {
    if (s[n] > s[n - 1]) throw Error(ErrorCode::kInvalidArgument, "index is not sorted");
  }
  if (s.back() < 1) throw Error(ErrorCode::kInvalidArgument, "index entries start at 1");
}

}  // namespace

std::uint64_t orbit_size(std::span<const int> sorted) {
  require_sorted(sorted);
  // Multinomial as a product of binomials over the runs.
  std::uint64_t size = 1;
  int placed = 0;
  std::size_t n = 0;
  while (n < sorted.size()) {
    std::size_t run = n;
    while (run < sorted.size() && sorted[run] == sorted[n]) ++run;
    const int r = static_cast<int>(run - n);
    placed += r;
    const std::uint64_t b = binomial(placed, r);
    if (b != 0 && size > std::numeric_limits<std::uint64_t>::max() / b) {
      throw Error(ErrorCode::kOutOfRange, "orbit size overflows 64 bits");
    }
    size *= b;
    n = run;
  }
  return size;
}

std::uint64_t num(int j, int n) {
  if (j < 0 || n < 1) {
    throw Error(ErrorCode::kInvalidArgument, "num(j, N) needs j >= 0 and N >= 1");
  }
  if (j == 0) return 0;
  return binomial(n + j - 1, j - 1);
}

std::uint64_t lex_rank(std::span<const int> sorted) {
  require_sorted(sorted);
  // Indices starting with a smaller first entry come first; the tail is
  // ranked among sorted indices of one less length (its entries never
  // exceed the head, so the unbounded enumeration applies).
  std::uint64_t rank = 0;
  const int len = static_cast<int>(sorted.size());
  for (int p = 0; p < len; ++p) rank += num(sorted[p] - 1, len - p);
  return rank + 1;
}

SortedIndex lex_unrank(std::uint64_t rank, int length) {
  if (rank < 1 || length < 1) {
    throw Error(ErrorCode::kInvalidArgument, "lex_unrank needs rank >= 1 and length >= 1");
  }
  SortedIndex s(static_cast<std::size_t>(length));
  for (int p = 0; p < length; ++p) {
    const int len = length - p;
    // Smallest head h with num(h, len) >= rank.
    int h = 1;
    while (num(h, len) < rank) ++h;
    rank -= num(h - 1, len);
    s[p] = h;
  }
  return s;
}

std::size_t OrbitModel::orbit_of(std::span<const int> index) const {
  const SortedIndex s = canonicalize(index);
  return static_cast<std::size_t>(lex_rank(s) - 1);
}

OrbitModel enumerate_orbits(int k, int n) {
  if (k < 1 || n < 1) {
    throw Error(ErrorCode::kInvalidArgument, "enumerate_orbits needs k >= 1 and N >= 1");
  }
  OrbitModel model;
  model.intervals = k;
  model.bidders = n;
  const std::uint64_t m = num(k, n);
  model.representatives.reserve(m);
  model.sizes.reserve(m);
  for (std::uint64_t r = 1; r <= m; ++r) {
    model.representatives.push_back(lex_unrank(r, n));
    model.sizes.push_back(orbit_size(model.representatives.back()));
  }
  return model;
}

std::vector<double> symmetrize(const CellArray& counts, const OrbitModel& model) {
  const GridSpec& grid = counts.grid();
  if (grid.intervals() != model.intervals || grid.bidders() != model.bidders) {
    throw Error(ErrorCode::kDimensionMismatch, "orbit model does not match the grid");
  }
  std::vector<double> totals(model.size(), 0.0);
  for (std::size_t c = 0; c < counts.size(); ++c) {
    totals[model.orbit_of(grid.index(c))] += counts[c];
  }
  return totals;
}

CellArray expand_orbits(std::span<const double> orbit_values, const OrbitModel& model,
                        const GridSpec& grid, CellKind kind) {
  if (orbit_values.size() != model.size() || grid.intervals() != model.intervals ||
      grid.bidders() != model.bidders) {
    throw Error(ErrorCode::kDimensionMismatch, "orbit values do not match the grid");
  }
  CellArray out(grid, kind);
  for (std::size_t c = 0; c < out.size(); ++c) {
    out[c] = orbit_values[model.orbit_of(grid.index(c))];
  }
  return out;
}

}  // namespace affiltest
