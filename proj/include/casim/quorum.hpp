#pragma once

// Size-based quorum systems. A quorum is any server subset of at least the
// threshold size; the coded protocols use threshold ceil((n+k)/2), which
// makes any two quorums intersect in at least k servers and leaves a quorum
// available whenever at most f servers fail, provided k <= n - 2f.

#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace casim {

struct QuorumSystem {
  int n = 0;
  int threshold = 0;

  bool is_quorum(std::size_t count) const {
    return static_cast<int>(count) >= threshold;
  }

  bool is_quorum(const std::set<int>& members) const {
    for (int s : members)
      if (s < 0 || s >= n) throw std::invalid_argument("server index out of range");
    return is_quorum(members.size());
  }
};

inline int cas_threshold(int n, int k) { return (n + k + 1) / 2; }

inline QuorumSystem cas_quorums(int n, int k) { return {n, cas_threshold(n, k)}; }

inline QuorumSystem majority_quorums(int n) { return {n, n / 2 + 1}; }

inline QuorumSystem ccoas_quorums(int n, int f) { return {n, n - f}; }

// Exhaustively checks that every pair of threshold-sized subsets of [0, n)
// intersects in at least k servers. Larger quorums only intersect more, so
// threshold-sized subsets are the worst case. Intended for n <= 16.
inline bool verify_intersection(int n, int k, int /*f*/) {
  if (n < 1 || n > 16) throw std::invalid_argument("verify_intersection: need 1 <= n <= 16");
  const int threshold = cas_threshold(n, k);
  if (threshold > n) return false;
  std::vector<std::uint32_t> quorums;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask)
    if (__builtin_popcount(mask) == threshold) quorums.push_back(mask);
  for (std::size_t a = 0; a < quorums.size(); ++a)
    for (std::size_t b = a; b < quorums.size(); ++b)
      if (__builtin_popcount(quorums[a] & quorums[b]) < k) return false;
  return true;
}

// True iff for every failure set B with |B| <= f some quorum avoids B.
// Because quorums are all threshold-sized subsets, this reduces to
// n - f >= threshold; the exhaustive form lives in the test oracles.
inline bool verify_availability(int n, int k, int f) {
  return n - f >= cas_threshold(n, k);
}

}  // namespace casim
