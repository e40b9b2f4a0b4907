#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <map>
#include <set>

#include "affiltest/error.hpp"
#include "affiltest/symmetry.hpp"

namespace affiltest {
namespace {

// All sorted (nonincreasing) tuples of length n with entries in {1..k}, in
// ascending lexicographic order, by brute force over k^n tuples.
std::vector<SortedIndex> brute_sorted(int k, int n) {
  std::set<SortedIndex> out;
  std::vector<int> t(static_cast<std::size_t>(n), 1);
  for (;;) {
    if (std::is_sorted(t.begin(), t.end(), std::greater<>())) out.insert(t);
    int p = n - 1;
    while (p >= 0 && ++t[p] > k) t[p--] = 1;
    if (p < 0) break;
  }
  return {out.begin(), out.end()};
}

TEST(Canonicalize, SortsDescending) {
  EXPECT_EQ(canonicalize(std::vector<int>{1, 3, 2}), (SortedIndex{3, 2, 1}));
  EXPECT_EQ(canonicalize(std::vector<int>{2, 2, 2}), (SortedIndex{2, 2, 2}));
  EXPECT_EQ(canonicalize(std::vector<int>{1, 2, 1}), (SortedIndex{2, 1, 1}));
}

TEST(OrbitSize, Examples) {
  EXPECT_EQ(orbit_size(SortedIndex{2, 1, 1}), 3u);
  EXPECT_EQ(orbit_size(SortedIndex{3, 2, 1}), 6u);
  EXPECT_EQ(orbit_size(SortedIndex{4, 3, 3, 2, 2, 2}), 60u);
  EXPECT_THROW(orbit_size(SortedIndex{1, 2}), Error);
}

TEST(OrbitSize, MatchesPermutationCount) {
  for (const auto& s : brute_sorted(4, 6)) {
    std::vector<int> p(s.rbegin(), s.rend());
    std::uint64_t perms = 0;
    do ++perms;
    while (std::next_permutation(p.begin(), p.end()));
    EXPECT_EQ(orbit_size(s), perms);
  }
}

TEST(Num, KnownValues) {
  EXPECT_EQ(num(2, 2), 3u);
  EXPECT_EQ(num(2, 3), 4u);
  for (int j = 1; j <= 20; ++j) EXPECT_EQ(num(j, 1), static_cast<std::uint64_t>(j));
  for (int n = 1; n <= 20; ++n) EXPECT_EQ(num(2, n), static_cast<std::uint64_t>(n + 1));
  EXPECT_EQ(num(0, 3), 0u);
  EXPECT_THROW(num(-1, 2), Error);
  EXPECT_THROW(num(2, 0), Error);
}

TEST(Num, MatchesEnumeration) {
  for (int k = 1; k <= 6; ++k)
    for (int n = 1; n <= 6; ++n) EXPECT_EQ(num(k, n), brute_sorted(k, n).size()) << k << "," << n;
}

TEST(Num, LargeValuesExactOrRejected) {
  EXPECT_EQ(num(33, 32), 1832624140942590534ULL);  // C(64, 32)
  EXPECT_THROW(num(64, 64), Error);
}

TEST(LexRank, WorkedExamples) {
  EXPECT_EQ(lex_rank(SortedIndex{1, 1, 1}), 1u);
  EXPECT_EQ(lex_rank(SortedIndex{2, 1, 1}), 2u);
  EXPECT_EQ(lex_rank(SortedIndex{2, 2, 1}), 3u);
  EXPECT_EQ(lex_rank(SortedIndex{3, 1, 1}), 5u);
  EXPECT_EQ(lex_rank(SortedIndex{3, 2, 2}), 7u);
  EXPECT_EQ(lex_rank(SortedIndex{4, 1, 1}), 11u);
}

TEST(LexRank, MatchesEnumerationAndUnranks) {
  for (int n = 1; n <= 6; ++n) {
    const auto all = brute_sorted(8, n);
    for (std::size_t r = 0; r < all.size(); ++r) {
      ASSERT_EQ(lex_rank(all[r]), r + 1);
      ASSERT_EQ(lex_unrank(r + 1, n), all[r]);
    }
  }
}

TEST(EnumerateOrbits, K2N3) {
  const OrbitModel m = enumerate_orbits(2, 3);
  ASSERT_EQ(m.size(), 4u);
  EXPECT_EQ(m.representatives[0], (SortedIndex{1, 1, 1}));
  EXPECT_EQ(m.representatives[1], (SortedIndex{2, 1, 1}));
  EXPECT_EQ(m.representatives[2], (SortedIndex{2, 2, 1}));
  EXPECT_EQ(m.representatives[3], (SortedIndex{2, 2, 2}));
  EXPECT_EQ(m.sizes, (std::vector<std::uint64_t>{1, 3, 3, 1}));
}

TEST(EnumerateOrbits, K3N2SixParameters) {
  const OrbitModel m = enumerate_orbits(3, 2);
  ASSERT_EQ(m.size(), 6u);
  std::multiset<std::uint64_t> sizes(m.sizes.begin(), m.sizes.end());
  EXPECT_EQ(sizes, (std::multiset<std::uint64_t>{1, 1, 1, 2, 2, 2}));
}

TEST(EnumerateOrbits, SingleCell) {
  for (int n = 1; n <= 6; ++n) EXPECT_EQ(enumerate_orbits(1, n).size(), 1u);
}

TEST(EnumerateOrbits, SizesSumToCells) {
  for (int k = 1; k <= 6; ++k) {
    for (int n = 2; n <= 6; ++n) {
      const OrbitModel m = enumerate_orbits(k, n);
      EXPECT_EQ(m.size(), num(k, n));
      std::uint64_t total = 0, cells = 1;
      for (auto s : m.sizes) total += s;
      for (int i = 0; i < n; ++i) cells *= static_cast<std::uint64_t>(k);
      EXPECT_EQ(total, cells);
    }
  }
}

TEST(Symmetrize, OrbitTotals) {
  const GridSpec g = GridSpec::equispaced(2, 2);
  const OrbitModel m = enumerate_orbits(2, 2);
  const CellArray c(g, CellKind::kCounts, {0, 3, 5, 0});  // (1,2):3, (2,1):5
  const auto t = symmetrize(c, m);
  EXPECT_EQ(t[m.orbit_of(std::vector<int>{2, 1})], 8);
  EXPECT_EQ(t[0] + t[1] + t[2], 8);

  const CellArray sym(g, CellKind::kCounts, {4, 2, 2, 1});
  const auto ts = symmetrize(sym, m);
  for (std::size_t o = 0; o < m.size(); ++o) {
    EXPECT_EQ(ts[o], m.sizes[o] * sym.at(m.representatives[o]));
  }
  for (double v : symmetrize(CellArray(g, CellKind::kCounts), m)) EXPECT_EQ(v, 0.0);
}

}  // namespace
}  // namespace affiltest
