#pragma once

#include <cstdint>
#include <string>

namespace tvts::kern {

// Dense inner-loop kernels behind the tensor ops. Two implementations exist:
// a scalar reference (always built) and an AVX2+FMA variant (built on x86-64,
// selected at runtime when the CPU supports it). Both use the same fixed
// per-output reduction order, so results are deterministic per backend;
// cross-backend agreement is tolerance-tested, not bit-exact.
//
// GEMM conventions (row-major, contiguous):
//   nn: C(m,n)  = A(m,k) * B(k,n)        c_ij = sum_l a_il * b_lj
//   nt: C(m,n)  = A(m,k) * B(n,k)^T      c_ij = dot(a_i., b_j.)
//   tn: C(m,n)  = A(k,m)^T * B(k,n)      c_ij = sum_l a_li * b_lj
// `acc` accumulates into C instead of overwriting.
struct Table {
  const char* name;

  void (*sgemm_nn)(int64_t m, int64_t k, int64_t n, const float* a, const float* b, float* c, bool acc);
  void (*sgemm_nt)(int64_t m, int64_t k, int64_t n, const float* a, const float* b, float* c, bool acc);
  void (*sgemm_tn)(int64_t m, int64_t k, int64_t n, const float* a, const float* b, float* c, bool acc);
  void (*dgemm_nn)(int64_t m, int64_t k, int64_t n, const double* a, const double* b, double* c, bool acc);
  void (*dgemm_nt)(int64_t m, int64_t k, int64_t n, const double* a, const double* b, double* c, bool acc);
  void (*dgemm_tn)(int64_t m, int64_t k, int64_t n, const double* a, const double* b, double* c, bool acc);

  void (*sadd)(int64_t n, const float* a, const float* b, float* out);
  void (*dadd)(int64_t n, const double* a, const double* b, double* out);
  void (*ssub)(int64_t n, const float* a, const float* b, float* out);
  void (*dsub)(int64_t n, const double* a, const double* b, double* out);
  void (*smul)(int64_t n, const float* a, const float* b, float* out);
  void (*dmul)(int64_t n, const double* a, const double* b, double* out);
  void (*sscale)(int64_t n, float alpha, const float* a, float* out);
  void (*dscale)(int64_t n, double alpha, const double* a, double* out);
  void (*saxpy)(int64_t n, float alpha, const float* x, float* y);
  void (*daxpy)(int64_t n, double alpha, const double* x, double* y);
  float (*sdot)(int64_t n, const float* a, const float* b);
  double (*ddot)(int64_t n, const double* a, const double* b);
};

enum class Backend { auto_detect, scalar, avx2 };

const Table& scalar_table();
#if TVTS_HAVE_AVX2_TU
const Table& avx2_table();
#endif

// Active table. First call resolves the backend: TVTS_KERNELS env override
// ("scalar"/"avx2"), else CPU detection.
const Table& active();
void force_backend(Backend b);     // tests use this
bool avx2_available();             // compiled in and supported by this CPU
std::string active_name();

// Typed wrappers so templated op code stays readable.
template <class T> void gemm_nn(int64_t m, int64_t k, int64_t n, const T* a, const T* b, T* c, bool acc = false);
template <class T> void gemm_nt(int64_t m, int64_t k, int64_t n, const T* a, const T* b, T* c, bool acc = false);
template <class T> void gemm_tn(int64_t m, int64_t k, int64_t n, const T* a, const T* b, T* c, bool acc = false);
template <class T> void add(int64_t n, const T* a, const T* b, T* out);
template <class T> void sub(int64_t n, const T* a, const T* b, T* out);
template <class T> void mul(int64_t n, const T* a, const T* b, T* out);
template <class T> void scale(int64_t n, T alpha, const T* a, T* out);
template <class T> void axpy(int64_t n, T alpha, const T* x, T* y);
template <class T> T dot(int64_t n, const T* a, const T* b);

#define TVTS_KERN_WRAP(T, pre)                                                                              \
  template <> inline void gemm_nn<T>(int64_t m, int64_t k, int64_t n, const T* a, const T* b, T* c, bool g) \
  { active().pre##gemm_nn(m, k, n, a, b, c, g); }                                                           \
  template <> inline void gemm_nt<T>(int64_t m, int64_t k, int64_t n, const T* a, const T* b, T* c, bool g) \
  { active().pre##gemm_nt(m, k, n, a, b, c, g); }                                                           \
  template <> inline void gemm_tn<T>(int64_t m, int64_t k, int64_t n, const T* a, const T* b, T* c, bool g) \
  { active().pre##gemm_tn(m, k, n, a, b, c, g); }                                                           \
  template <> inline void add<T>(int64_t n, const T* a, const T* b, T* o) { active().pre##add(n, a, b, o); } \
  template <> inline void sub<T>(int64_t n, const T* a, const T* b, T* o) { active().pre##sub(n, a, b, o); } \
  template <> inline void mul<T>(int64_t n, const T* a, const T* b, T* o) { active().pre##mul(n, a, b, o); } \
  template <> inline void scale<T>(int64_t n, T al, const T* a, T* o) { active().pre##scale(n, al, a, o); }  \
  template <> inline void axpy<T>(int64_t n, T al, const T* x, T* y) { active().pre##axpy(n, al, x, y); }    \
  template <> inline T dot<T>(int64_t n, const T* a, const T* b) { return active().pre##dot(n, a, b); }

TVTS_KERN_WRAP(float, s)
TVTS_KERN_WRAP(double, d)
#undef TVTS_KERN_WRAP

}  // namespace tvts::kern
