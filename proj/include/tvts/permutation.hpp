#pragma once

#include <cstdint>
#include <vector>

#include "tvts/common.hpp"

namespace tvts {

inline bool is_permutation_of_n(const std::vector<int>& p) {
  std::vector<bool> seen(p.size(), false);
  for (int v : p) {
    if (v < 0 || v >= static_cast<int>(p.size()) || seen[static_cast<size_t>(v)]) return false;
    seen[static_cast<size_t>(v)] = true;
  }
  return true;
}

inline std::vector<int> invert_permutation(const std::vector<int>& p) {
  std::vector<int> inv(p.size());
  for (size_t i = 0; i < p.size(); ++i) inv[static_cast<size_t>(p[i])] = static_cast<int>(i);
  return inv;
}

inline int64_t factorial(int k) {
  int64_t f = 1;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

// Lexicographic rank of a permutation of {0..k-1}; identity has rank 0.
inline int64_t perm_lex_rank(const std::vector<int>& p) {
  if (!is_permutation_of_n(p)) throw LabelError("perm_lex_rank: not a permutation");
  const int k = static_cast<int>(p.size());
  int64_t rank = 0;
  for (int i = 0; i < k; ++i) {
    int smaller = 0;
    for (int j = i + 1; j < k; ++j) smaller += p[static_cast<size_t>(j)] < p[static_cast<size_t>(i)];
    rank += smaller * factorial(k - 1 - i);
  }
  return rank;
}

inline std::vector<int> perm_from_lex_rank(int64_t rank, int k) {
  if (rank < 0 || rank >= factorial(k)) throw LabelError("perm_from_lex_rank: rank out of range");
  std::vector<int> pool(static_cast<size_t>(k));
  for (int i = 0; i < k; ++i) pool[static_cast<size_t>(i)] = i;
  std::vector<int> out;
  out.reserve(static_cast<size_t>(k));
  for (int i = k; i >= 1; --i) {
    const int64_t f = factorial(i - 1);
    const auto idx = static_cast<size_t>(rank / f);
    rank %= f;
    out.push_back(pool[idx]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(idx));
  }
  return out;
}

}  // namespace tvts
