// AVX2+FMA kernels. Compiled with -mavx2 -mfma in this TU only; the dispatcher
// selects them at runtime after a CPU check. Per-output reduction order is a
// fixed lane tree, so each backend is individually deterministic.

#include <immintrin.h>

#include "tvts/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tvts::kern {
namespace {

inline float hsum8(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  lo = _mm_add_ps(lo, _mm_movehl_ps(lo, lo));
  lo = _mm_add_ss(lo, _mm_shuffle_ps(lo, lo, 1));
  return _mm_cvtss_f32(lo);
}

inline double hsum4(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

// ---------------------------------------------------------------- f32 GEMM

void sgemm_nn_avx2(int64_t m, int64_t k, int64_t n, const float* a, const float* b, float* c, bool acc) {
  const int64_t mb = (m + 3) / 4;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (m * k * n > 65536)
#endif
  for (int64_t blk = 0; blk < mb; ++blk) {
    const int64_t i0 = blk * 4;
    const int64_t rows = (m - i0) < 4 ? (m - i0) : 4;
    int64_t j = 0;
    if (rows == 4) {
      for (; j + 16 <= n; j += 16) {
        __m256 c00, c01, c10, c11, c20, c21, c30, c31;
        if (acc) {
          c00 = _mm256_loadu_ps(c + (i0 + 0) * n + j); c01 = _mm256_loadu_ps(c + (i0 + 0) * n + j + 8);
          c10 = _mm256_loadu_ps(c + (i0 + 1) * n + j); c11 = _mm256_loadu_ps(c + (i0 + 1) * n + j + 8);
          c20 = _mm256_loadu_ps(c + (i0 + 2) * n + j); c21 = _mm256_loadu_ps(c + (i0 + 2) * n + j + 8);
          c30 = _mm256_loadu_ps(c + (i0 + 3) * n + j); c31 = _mm256_loadu_ps(c + (i0 + 3) * n + j + 8);
        } else {
          c00 = c01 = c10 = c11 = c20 = c21 = c30 = c31 = _mm256_setzero_ps();
        }
        for (int64_t l = 0; l < k; ++l) {
          const __m256 b0 = _mm256_loadu_ps(b + l * n + j);
          const __m256 b1 = _mm256_loadu_ps(b + l * n + j + 8);
          __m256 va;
          va = _mm256_broadcast_ss(a + (i0 + 0) * k + l);
          c00 = _mm256_fmadd_ps(va, b0, c00); c01 = _mm256_fmadd_ps(va, b1, c01);
          va = _mm256_broadcast_ss(a + (i0 + 1) * k + l);
          c10 = _mm256_fmadd_ps(va, b0, c10); c11 = _mm256_fmadd_ps(va, b1, c11);
          va = _mm256_broadcast_ss(a + (i0 + 2) * k + l);
          c20 = _mm256_fmadd_ps(va, b0, c20); c21 = _mm256_fmadd_ps(va, b1, c21);
          va = _mm256_broadcast_ss(a + (i0 + 3) * k + l);
          c30 = _mm256_fmadd_ps(va, b0, c30); c31 = _mm256_fmadd_ps(va, b1, c31);
        }
        _mm256_storeu_ps(c + (i0 + 0) * n + j, c00); _mm256_storeu_ps(c + (i0 + 0) * n + j + 8, c01);
        _mm256_storeu_ps(c + (i0 + 1) * n + j, c10); _mm256_storeu_ps(c + (i0 + 1) * n + j + 8, c11);
        _mm256_storeu_ps(c + (i0 + 2) * n + j, c20); _mm256_storeu_ps(c + (i0 + 2) * n + j + 8, c21);
        _mm256_storeu_ps(c + (i0 + 3) * n + j, c30); _mm256_storeu_ps(c + (i0 + 3) * n + j + 8, c31);
      }
    }
    // leftover rows and columns: one row at a time
    for (int64_t r = 0; r < rows; ++r) {
      const int64_t i = i0 + r;
      int64_t jj = (rows == 4) ? j : 0;
      for (; jj + 8 <= n; jj += 8) {
        __m256 cc = acc ? _mm256_loadu_ps(c + i * n + jj) : _mm256_setzero_ps();
        for (int64_t l = 0; l < k; ++l) {
          const __m256 bv = _mm256_loadu_ps(b + l * n + jj);
          cc = _mm256_fmadd_ps(_mm256_broadcast_ss(a + i * k + l), bv, cc);
        }
        _mm256_storeu_ps(c + i * n + jj, cc);
      }
      for (; jj < n; ++jj) {
        float s = acc ? c[i * n + jj] : 0.0f;
        for (int64_t l = 0; l < k; ++l) s += a[i * k + l] * b[l * n + jj];
        c[i * n + jj] = s;
      }
    }
  }
}

void sgemm_nt_avx2(int64_t m, int64_t k, int64_t n, const float* a, const float* b, float* c, bool acc) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (m * k * n > 65536)
#endif
  for (int64_t i = 0; i < m; ++i) {
    const float* ai = a + i * k;
    int64_t j = 0;
    for (; j + 4 <= n; j += 4) {
      __m256 s0 = _mm256_setzero_ps(), s1 = _mm256_setzero_ps();
      __m256 s2 = _mm256_setzero_ps(), s3 = _mm256_setzero_ps();
      int64_t l = 0;
      for (; l + 8 <= k; l += 8) {
        const __m256 av = _mm256_loadu_ps(ai + l);
        s0 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b + (j + 0) * k + l), s0);
        s1 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b + (j + 1) * k + l), s1);
        s2 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b + (j + 2) * k + l), s2);
        s3 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b + (j + 3) * k + l), s3);
      }
      float r0 = hsum8(s0), r1 = hsum8(s1), r2 = hsum8(s2), r3 = hsum8(s3);
      for (; l < k; ++l) {
        const float av = ai[l];
        r0 += av * b[(j + 0) * k + l];
        r1 += av * b[(j + 1) * k + l];
        r2 += av * b[(j + 2) * k + l];
        r3 += av * b[(j + 3) * k + l];
      }
      float* ci = c + i * n + j;
      if (acc) { ci[0] += r0; ci[1] += r1; ci[2] += r2; ci[3] += r3; }
      else { ci[0] = r0; ci[1] = r1; ci[2] = r2; ci[3] = r3; }
    }
    for (; j < n; ++j) {
      const float* bj = b + j * k;
      __m256 s = _mm256_setzero_ps();
      int64_t l = 0;
      for (; l + 8 <= k; l += 8) s = _mm256_fmadd_ps(_mm256_loadu_ps(ai + l), _mm256_loadu_ps(bj + l), s);
      float r = hsum8(s);
      for (; l < k; ++l) r += ai[l] * bj[l];
      c[i * n + j] = acc ? c[i * n + j] + r : r;
    }
  }
}

void sgemm_tn_avx2(int64_t m, int64_t k, int64_t n, const float* a, const float* b, float* c, bool acc) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (m * k * n > 65536)
#endif
  for (int64_t i = 0; i < m; ++i) {
    float* ci = c + i * n;
    if (!acc) {
      for (int64_t j = 0; j < n; ++j) ci[j] = 0.0f;
    }
    for (int64_t l = 0; l < k; ++l) {
      const __m256 va = _mm256_broadcast_ss(a + l * m + i);
      const float* bl = b + l * n;
      int64_t j = 0;
      for (; j + 8 <= n; j += 8) {
        _mm256_storeu_ps(ci + j, _mm256_fmadd_ps(va, _mm256_loadu_ps(bl + j), _mm256_loadu_ps(ci + j)));
      }
      const float af = a[l * m + i];
      for (; j < n; ++j) ci[j] += af * bl[j];
    }
  }
}

// ---------------------------------------------------------------- f64 GEMM

void dgemm_nn_avx2(int64_t m, int64_t k, int64_t n, const double* a, const double* b, double* c, bool acc) {
  const int64_t mb = (m + 3) / 4;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (m * k * n > 65536)
#endif
  for (int64_t blk = 0; blk < mb; ++blk) {
    const int64_t i0 = blk * 4;
    const int64_t rows = (m - i0) < 4 ? (m - i0) : 4;
    int64_t j = 0;
    if (rows == 4) {
      for (; j + 8 <= n; j += 8) {
        __m256d c00, c01, c10, c11, c20, c21, c30, c31;
        if (acc) {
          c00 = _mm256_loadu_pd(c + (i0 + 0) * n + j); c01 = _mm256_loadu_pd(c + (i0 + 0) * n + j + 4);
          c10 = _mm256_loadu_pd(c + (i0 + 1) * n + j); c11 = _mm256_loadu_pd(c + (i0 + 1) * n + j + 4);
          c20 = _mm256_loadu_pd(c + (i0 + 2) * n + j); c21 = _mm256_loadu_pd(c + (i0 + 2) * n + j + 4);
          c30 = _mm256_loadu_pd(c + (i0 + 3) * n + j); c31 = _mm256_loadu_pd(c + (i0 + 3) * n + j + 4);
        } else {
          c00 = c01 = c10 = c11 = c20 = c21 = c30 = c31 = _mm256_setzero_pd();
        }
        for (int64_t l = 0; l < k; ++l) {
          const __m256d b0 = _mm256_loadu_pd(b + l * n + j);
          const __m256d b1 = _mm256_loadu_pd(b + l * n + j + 4);
          __m256d va;
          va = _mm256_broadcast_sd(a + (i0 + 0) * k + l);
          c00 = _mm256_fmadd_pd(va, b0, c00); c01 = _mm256_fmadd_pd(va, b1, c01);
          va = _mm256_broadcast_sd(a + (i0 + 1) * k + l);
          c10 = _mm256_fmadd_pd(va, b0, c10); c11 = _mm256_fmadd_pd(va, b1, c11);
          va = _mm256_broadcast_sd(a + (i0 + 2) * k + l);
          c20 = _mm256_fmadd_pd(va, b0, c20); c21 = _mm256_fmadd_pd(va, b1, c21);
          va = _mm256_broadcast_sd(a + (i0 + 3) * k + l);
          c30 = _mm256_fmadd_pd(va, b0, c30); c31 = _mm256_fmadd_pd(va, b1, c31);
        }
        _mm256_storeu_pd(c + (i0 + 0) * n + j, c00); _mm256_storeu_pd(c + (i0 + 0) * n + j + 4, c01);
        _mm256_storeu_pd(c + (i0 + 1) * n + j, c10); _mm256_storeu_pd(c + (i0 + 1) * n + j + 4, c11);
        _mm256_storeu_pd(c + (i0 + 2) * n + j, c20); _mm256_storeu_pd(c + (i0 + 2) * n + j + 4, c21);
        _mm256_storeu_pd(c + (i0 + 3) * n + j, c30); _mm256_storeu_pd(c + (i0 + 3) * n + j + 4, c31);
      }
    }
    for (int64_t r = 0; r < rows; ++r) {
      const int64_t i = i0 + r;
      int64_t jj = (rows == 4) ? j : 0;
      for (; jj + 4 <= n; jj += 4) {
        __m256d cc = acc ? _mm256_loadu_pd(c + i * n + jj) : _mm256_setzero_pd();
        for (int64_t l = 0; l < k; ++l) {
          cc = _mm256_fmadd_pd(_mm256_broadcast_sd(a + i * k + l), _mm256_loadu_pd(b + l * n + jj), cc);
        }
        _mm256_storeu_pd(c + i * n + jj, cc);
      }
      for (; jj < n; ++jj) {
        double s = acc ? c[i * n + jj] : 0.0;
        for (int64_t l = 0; l < k; ++l) s += a[i * k + l] * b[l * n + jj];
        c[i * n + jj] = s;
      }
    }
  }
}

void dgemm_nt_avx2(int64_t m, int64_t k, int64_t n, const double* a, const double* b, double* c, bool acc) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (m * k * n > 65536)
#endif
  for (int64_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    for (int64_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      __m256d s = _mm256_setzero_pd();
      int64_t l = 0;
      for (; l + 4 <= k; l += 4) s = _mm256_fmadd_pd(_mm256_loadu_pd(ai + l), _mm256_loadu_pd(bj + l), s);
      double r = hsum4(s);
      for (; l < k; ++l) r += ai[l] * bj[l];
      c[i * n + j] = acc ? c[i * n + j] + r : r;
    }
  }
}

void dgemm_tn_avx2(int64_t m, int64_t k, int64_t n, const double* a, const double* b, double* c, bool acc) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (m * k * n > 65536)
#endif
  for (int64_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    if (!acc) {
      for (int64_t j = 0; j < n; ++j) ci[j] = 0.0;
    }
    for (int64_t l = 0; l < k; ++l) {
      const __m256d va = _mm256_broadcast_sd(a + l * m + i);
      const double* bl = b + l * n;
      int64_t j = 0;
      for (; j + 4 <= n; j += 4) {
        _mm256_storeu_pd(ci + j, _mm256_fmadd_pd(va, _mm256_loadu_pd(bl + j), _mm256_loadu_pd(ci + j)));
      }
      const double af = a[l * m + i];
      for (; j < n; ++j) ci[j] += af * bl[j];
    }
  }
}

// ---------------------------------------------------------------- elementwise

void sadd_avx2(int64_t n, const float* a, const float* b, float* o) {
  int64_t i = 0;
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(o + i, _mm256_add_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) o[i] = a[i] + b[i];
}
void dadd_avx2(int64_t n, const double* a, const double* b, double* o) {
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(o + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) o[i] = a[i] + b[i];
}
void ssub_avx2(int64_t n, const float* a, const float* b, float* o) {
  int64_t i = 0;
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(o + i, _mm256_sub_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) o[i] = a[i] - b[i];
}
void dsub_avx2(int64_t n, const double* a, const double* b, double* o) {
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(o + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) o[i] = a[i] - b[i];
}
void smul_avx2(int64_t n, const float* a, const float* b, float* o) {
  int64_t i = 0;
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(o + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) o[i] = a[i] * b[i];
}
void dmul_avx2(int64_t n, const double* a, const double* b, double* o) {
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(o + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) o[i] = a[i] * b[i];
}
void sscale_avx2(int64_t n, float al, const float* a, float* o) {
  const __m256 v = _mm256_set1_ps(al);
  int64_t i = 0;
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(o + i, _mm256_mul_ps(v, _mm256_loadu_ps(a + i)));
  for (; i < n; ++i) o[i] = al * a[i];
}
void dscale_avx2(int64_t n, double al, const double* a, double* o) {
  const __m256d v = _mm256_set1_pd(al);
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(o + i, _mm256_mul_pd(v, _mm256_loadu_pd(a + i)));
  for (; i < n; ++i) o[i] = al * a[i];
}
void saxpy_avx2(int64_t n, float al, const float* x, float* y) {
  const __m256 v = _mm256_set1_ps(al);
  int64_t i = 0;
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(y + i, _mm256_fmadd_ps(v, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  for (; i < n; ++i) y[i] += al * x[i];
}
void daxpy_avx2(int64_t n, double al, const double* x, double* y) {
  const __m256d v = _mm256_set1_pd(al);
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(y + i, _mm256_fmadd_pd(v, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += al * x[i];
}
float sdot_avx2(int64_t n, const float* a, const float* b) {
  __m256 s = _mm256_setzero_ps();
  int64_t i = 0;
  for (; i + 8 <= n; i += 8) s = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), s);
  float r = hsum8(s);
  for (; i < n; ++i) r += a[i] * b[i];
  return r;
}
double ddot_avx2(int64_t n, const double* a, const double* b) {
  __m256d s = _mm256_setzero_pd();
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) s = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), s);
  double r = hsum4(s);
  for (; i < n; ++i) r += a[i] * b[i];
  return r;
}

}  // namespace

const Table& avx2_table() {
  static const Table t = {
      "avx2",
      &sgemm_nn_avx2, &sgemm_nt_avx2, &sgemm_tn_avx2,
      &dgemm_nn_avx2, &dgemm_nt_avx2, &dgemm_tn_avx2,
      &sadd_avx2, &dadd_avx2,
      &ssub_avx2, &dsub_avx2,
      &smul_avx2, &dmul_avx2,
      &sscale_avx2, &dscale_avx2,
      &saxpy_avx2, &daxpy_avx2,
      &sdot_avx2, &ddot_avx2,
  };
  return t;
}

}  // namespace tvts::kern
