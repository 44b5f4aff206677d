// Scalar reference kernels. These define the semantics the SIMD variants are
// equivalence-tested against. Inner loops are written in the axpy form so the
// per-output accumulation order is the plain l = 0..k-1 sweep.

#include "tvts/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tvts::kern {
namespace {

template <class T>
void gemm_nn_ref(int64_t m, int64_t k, int64_t n, const T* a, const T* b, T* c, bool acc) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (m * k * n > 65536)
#endif
  for (int64_t i = 0; i < m; ++i) {
    T* ci = c + i * n;
    if (!acc) {
      for (int64_t j = 0; j < n; ++j) ci[j] = T(0);
    }
    const T* ai = a + i * k;
    for (int64_t l = 0; l < k; ++l) {
      const T ail = ai[l];
      const T* bl = b + l * n;
      for (int64_t j = 0; j < n; ++j) ci[j] += ail * bl[j];
    }
  }
}

template <class T>
void gemm_nt_ref(int64_t m, int64_t k, int64_t n, const T* a, const T* b, T* c, bool acc) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (m * k * n > 65536)
#endif
  for (int64_t i = 0; i < m; ++i) {
    const T* ai = a + i * k;
    T* ci = c + i * n;
    for (int64_t j = 0; j < n; ++j) {
      const T* bj = b + j * k;
      T s = T(0);
      for (int64_t l = 0; l < k; ++l) s += ai[l] * bj[l];
      ci[j] = acc ? ci[j] + s : s;
    }
  }
}

template <class T>
void gemm_tn_ref(int64_t m, int64_t k, int64_t n, const T* a, const T* b, T* c, bool acc) {
  // a is (k, m); output row i accumulates b rows weighted by a's column i.
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (m * k * n > 65536)
#endif
  for (int64_t i = 0; i < m; ++i) {
    T* ci = c + i * n;
    if (!acc) {
      for (int64_t j = 0; j < n; ++j) ci[j] = T(0);
    }
    for (int64_t l = 0; l < k; ++l) {
      const T ali = a[l * m + i];
      const T* bl = b + l * n;
      for (int64_t j = 0; j < n; ++j) ci[j] += ali * bl[j];
    }
  }
}

template <class T> void add_ref(int64_t n, const T* a, const T* b, T* o) { for (int64_t i = 0; i < n; ++i) o[i] = a[i] + b[i]; }
template <class T> void sub_ref(int64_t n, const T* a, const T* b, T* o) { for (int64_t i = 0; i < n; ++i) o[i] = a[i] - b[i]; }
template <class T> void mul_ref(int64_t n, const T* a, const T* b, T* o) { for (int64_t i = 0; i < n; ++i) o[i] = a[i] * b[i]; }
template <class T> void scale_ref(int64_t n, T al, const T* a, T* o) { for (int64_t i = 0; i < n; ++i) o[i] = al * a[i]; }
template <class T> void axpy_ref(int64_t n, T al, const T* x, T* y) { for (int64_t i = 0; i < n; ++i) y[i] += al * x[i]; }
template <class T> T dot_ref(int64_t n, const T* a, const T* b) {
  T s = T(0);
  for (int64_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

const Table& scalar_table() {
  static const Table t = {
      "scalar",
      &gemm_nn_ref<float>, &gemm_nt_ref<float>, &gemm_tn_ref<float>,
      &gemm_nn_ref<double>, &gemm_nt_ref<double>, &gemm_tn_ref<double>,
      &add_ref<float>, &add_ref<double>,
      &sub_ref<float>, &sub_ref<double>,
      &mul_ref<float>, &mul_ref<double>,
      &scale_ref<float>, &scale_ref<double>,
      &axpy_ref<float>, &axpy_ref<double>,
      &dot_ref<float>, &dot_ref<double>,
  };
  return t;
}

}  // namespace tvts::kern
