#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <vector>

#include "casim/quorum.hpp"

using namespace casim;

namespace {

// Exhaustive reference checks over explicit subset enumeration, independent
// of the arithmetic shortcuts in the library.
bool oracle_intersection(int n, int k, int threshold) {
  std::vector<std::uint32_t> quorums;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask)
    if (__builtin_popcount(mask) >= threshold) quorums.push_back(mask);
  for (const auto a : quorums)
    for (const auto b : quorums)
      if (__builtin_popcount(a & b) < k) return false;
  return true;
}

bool oracle_availability(int n, int f, int threshold) {
  // For every failure set of size exactly f, some quorum must avoid it.
  // Smaller failure sets only make things easier. A quorum avoiding the set
  // is a threshold-sized subset of its complement, so the complement itself
  // is the best witness.
  const std::uint32_t all = (1u << n) - 1;
  for (std::uint32_t faults = 0; faults <= all; ++faults) {
    if (__builtin_popcount(faults) != f) continue;
    if (__builtin_popcount(all & ~faults) < threshold) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("threshold formula is the smallest intersecting size") {
  CHECK(cas_threshold(5, 3) == 4);
  CHECK(cas_threshold(5, 1) == 3);
  CHECK(cas_threshold(4, 2) == 3);
  CHECK(cas_threshold(7, 3) == 5);
  CHECK(cas_threshold(9, 5) == 7);

  // ceil((n+k)/2): any two subsets of that size overlap in >= k elements,
  // while threshold-1 already admits a pair overlapping in only k-1.
  for (int n = 2; n <= 12; ++n)
    for (int k = 1; k < n; ++k) {
      const int threshold = cas_threshold(n, k);
      CHECK(2 * threshold - n >= k);
      CHECK(2 * (threshold - 1) - n < k);
    }
}

TEST_CASE("intersection matches the exhaustive oracle for all n up to 12") {
  for (int n = 2; n <= 12; ++n)
    for (int k = 1; k < n; ++k) {
      INFO("n=" << n << " k=" << k);
      CHECK(verify_intersection(n, k, 0));
      CHECK(oracle_intersection(n, k, cas_threshold(n, k)));
      // One less than the threshold must break intersection somewhere.
      if (cas_threshold(n, k) - 1 >= 1)
        CHECK_FALSE(oracle_intersection(n, k, cas_threshold(n, k) - 1));
    }
}

TEST_CASE("availability matches the exhaustive oracle for all n up to 12") {
  for (int n = 2; n <= 12; ++n)
    for (int k = 1; k < n; ++k)
      for (int f = 0; f <= n; ++f) {
        INFO("n=" << n << " k=" << k << " f=" << f);
        CHECK(verify_availability(n, k, f) ==
              oracle_availability(n, f, cas_threshold(n, k)));
      }
}

TEST_CASE("k at most n minus 2f is exactly what keeps quorums available") {
  for (int n = 3; n <= 12; ++n)
    for (int f = 1; 2 * f < n; ++f) {
      const int k_max = n - 2 * f;
      CHECK(verify_availability(n, k_max, f));
      if (k_max + 1 < n) CHECK_FALSE(verify_availability(n, k_max + 1, f));
    }
}

TEST_CASE("quorum membership checks by size and by set") {
  const QuorumSystem q = cas_quorums(5, 3);
  CHECK(q.threshold == 4);
  CHECK_FALSE(q.is_quorum(std::size_t{3}));
  CHECK(q.is_quorum(std::size_t{4}));
  CHECK(q.is_quorum(std::set<int>{0, 1, 2, 3}));
  CHECK_FALSE(q.is_quorum(std::set<int>{0, 1, 2}));
  CHECK_THROWS_AS(q.is_quorum(std::set<int>{0, 1, 2, 7}), std::invalid_argument);

  CHECK(majority_quorums(5).threshold == 3);
  CHECK(majority_quorums(4).threshold == 3);
  CHECK(ccoas_quorums(5, 1).threshold == 4);
  CHECK(ccoas_quorums(7, 2).threshold == 5);
}

TEST_CASE("coded and majority quorums coincide at k equal to one") {
  for (int n = 2; n <= 12; ++n)
    CHECK(cas_threshold(n, 1) == majority_quorums(n).threshold);
}

TEST_CASE("verify_intersection bounds its input size") {
  CHECK_THROWS_AS(verify_intersection(17, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(verify_intersection(0, 1, 0), std::invalid_argument);
}
