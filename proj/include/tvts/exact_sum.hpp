#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>

namespace tvts {

// Permutation-invariant floating-point summation.
//
// Terms are accumulated in 128-bit fixed point anchored at the largest term's
// exponent, so the result is bit-identical for any ordering of the inputs.
// This is what makes token-permutation equivariance of attention and the
// label-permutation identity of the sort loss hold exactly rather than up to
// rounding. Bits more than 110 below the top term are dropped value-wise
// (never order-wise); precision still exceeds a plain double accumulation.
//
// Capacity: |terms| <= 2^17 before the 128-bit headroom could overflow.
inline double perm_invariant_sum(const double* xs, size_t n) {
  int emax = 0;
  bool any = false;
  for (size_t i = 0; i < n; ++i) {
    const double x = xs[i];
    if (x == 0.0) continue;
    int e;
    std::frexp(x, &e);
    if (!any || e > emax) emax = e;
    any = true;
  }
  if (!any) return 0.0;

  const int unit = emax - 110;  // value of accumulator bit 0 is 2^unit
  __int128 acc = 0;
  for (size_t i = 0; i < n; ++i) {
    const double x = xs[i];
    if (x == 0.0) continue;
    int e;
    const double m = std::frexp(x, &e);  // x = m * 2^e, |m| in [0.5, 1)
    const auto m53 = static_cast<int64_t>(std::ldexp(m, 53));  // exact, 53 bits
    const int shift = e - 53 - unit;                           // <= 57
    if (shift >= 0) {
      acc += static_cast<__int128>(m53) << shift;
    } else if (shift >= -53) {
      acc += static_cast<__int128>(m53 >> -shift);  // arithmetic shift: value-based truncation
    }  // terms more than 110 bits below the max are beyond resolution
  }
  return std::ldexp(static_cast<double>(acc), unit);
}

inline float perm_invariant_sum(const float* xs, size_t n, double* scratch, size_t cap) {
  // float terms convert exactly to double; reuse the double path.
  (void)cap;
  for (size_t i = 0; i < n; ++i) scratch[i] = static_cast<double>(xs[i]);
  return static_cast<float>(perm_invariant_sum(scratch, n));
}

}  // namespace tvts
