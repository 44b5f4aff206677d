#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "tvts/exact_sum.hpp"
#include "tvts/kernels.hpp"
#include "tvts/rng.hpp"

using namespace tvts;

namespace {

template <class T>
std::vector<T> random_vec(size_t n, Rng& rng) {
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(rng.uniform(-1.0, 1.0));
  return v;
}

template <class T>
void naive_gemm_nn(int64_t m, int64_t k, int64_t n, const T* a, const T* b, T* c) {
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (int64_t l = 0; l < k; ++l) s += static_cast<double>(a[i * k + l]) * static_cast<double>(b[l * n + j]);
      c[i * n + j] = static_cast<T>(s);
    }
  }
}

template <class T>
double max_rel_diff(const std::vector<T>& a, const std::vector<T>& b) {
  double worst = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double x = static_cast<double>(a[i]), y = static_cast<double>(b[i]);
    worst = std::max(worst, std::fabs(x - y) / std::max({1.0, std::fabs(x), std::fabs(y)}));
  }
  return worst;
}

}  // namespace

TEST_CASE("gemm variants match a naive triple loop") {
  Rng rng(42);
  for (auto [m, k, n] : {std::tuple<int64_t, int64_t, int64_t>{1, 1, 1}, {3, 5, 7}, {17, 64, 33}, {64, 192, 64}}) {
    auto a = random_vec<double>(static_cast<size_t>(m * k), rng);
    auto b = random_vec<double>(static_cast<size_t>(k * n), rng);
    std::vector<double> want(static_cast<size_t>(m * n)), got(static_cast<size_t>(m * n));
    naive_gemm_nn<double>(m, k, n, a.data(), b.data(), want.data());
    kern::gemm_nn<double>(m, k, n, a.data(), b.data(), got.data());
    CHECK(max_rel_diff(want, got) < 1e-12);

    // nt: feed b transposed
    std::vector<double> bt(static_cast<size_t>(n * k));
    for (int64_t l = 0; l < k; ++l) {
      for (int64_t j = 0; j < n; ++j) bt[static_cast<size_t>(j * k + l)] = b[static_cast<size_t>(l * n + j)];
    }
    kern::gemm_nt<double>(m, k, n, a.data(), bt.data(), got.data());
    CHECK(max_rel_diff(want, got) < 1e-12);

    // tn: feed a transposed
    std::vector<double> at(static_cast<size_t>(k * m));
    for (int64_t i = 0; i < m; ++i) {
      for (int64_t l = 0; l < k; ++l) at[static_cast<size_t>(l * m + i)] = a[static_cast<size_t>(i * k + l)];
    }
    kern::gemm_tn<double>(m, k, n, at.data(), b.data(), got.data());
    CHECK(max_rel_diff(want, got) < 1e-12);
  }
}

TEST_CASE("scalar and SIMD backends agree within tolerance") {
  if (!kern::avx2_available()) {
    MESSAGE("AVX2 not available; backend equivalence reduced to identity");
    return;
  }
  Rng rng(7);
  const int64_t m = 37, k = 129, n = 61;

  auto run_all = [&](auto tag, double tol) {
    using T = decltype(tag);
    auto a = random_vec<T>(static_cast<size_t>(m * k), rng);
    auto b = random_vec<T>(static_cast<size_t>(k * n), rng);
    auto bt = random_vec<T>(static_cast<size_t>(n * k), rng);
    auto at = random_vec<T>(static_cast<size_t>(k * m), rng);
    std::vector<T> r_scalar(static_cast<size_t>(m * n)), r_simd(static_cast<size_t>(m * n));

    kern::force_backend(kern::Backend::scalar);
    kern::gemm_nn<T>(m, k, n, a.data(), b.data(), r_scalar.data());
    kern::force_backend(kern::Backend::avx2);
    kern::gemm_nn<T>(m, k, n, a.data(), b.data(), r_simd.data());
    CHECK(max_rel_diff(r_scalar, r_simd) < tol);

    kern::force_backend(kern::Backend::scalar);
    kern::gemm_nt<T>(m, k, n, a.data(), bt.data(), r_scalar.data());
    kern::force_backend(kern::Backend::avx2);
    kern::gemm_nt<T>(m, k, n, a.data(), bt.data(), r_simd.data());
    CHECK(max_rel_diff(r_scalar, r_simd) < tol);

    kern::force_backend(kern::Backend::scalar);
    kern::gemm_tn<T>(m, k, n, at.data(), b.data(), r_scalar.data());
    kern::force_backend(kern::Backend::avx2);
    kern::gemm_tn<T>(m, k, n, at.data(), b.data(), r_simd.data());
    CHECK(max_rel_diff(r_scalar, r_simd) < tol);

    auto x = random_vec<T>(1001, rng);
    auto y = random_vec<T>(1001, rng);
    std::vector<T> o1(1001), o2(1001);
    kern::force_backend(kern::Backend::scalar);
    kern::mul<T>(1001, x.data(), y.data(), o1.data());
    const double d1 = static_cast<double>(kern::dot<T>(1001, x.data(), y.data()));
    kern::force_backend(kern::Backend::avx2);
    kern::mul<T>(1001, x.data(), y.data(), o2.data());
    const double d2 = static_cast<double>(kern::dot<T>(1001, x.data(), y.data()));
    CHECK(max_rel_diff(o1, o2) == 0.0);  // elementwise ops are bit-identical
    CHECK(std::fabs(d1 - d2) / std::max(1.0, std::fabs(d1)) < tol);
    kern::force_backend(kern::Backend::auto_detect);
  };
  run_all(double{}, 1e-12);
  run_all(float{}, 1e-5);
}

TEST_CASE("kernels are deterministic across repeated calls") {
  Rng rng(11);
  const int64_t m = 53, k = 77, n = 31;
  auto a = random_vec<double>(static_cast<size_t>(m * k), rng);
  auto b = random_vec<double>(static_cast<size_t>(k * n), rng);
  std::vector<double> r1(static_cast<size_t>(m * n)), r2(static_cast<size_t>(m * n));
  kern::gemm_nn<double>(m, k, n, a.data(), b.data(), r1.data());
  for (int rep = 0; rep < 5; ++rep) {
    kern::gemm_nn<double>(m, k, n, a.data(), b.data(), r2.data());
    CHECK(r1 == r2);
  }
}

TEST_CASE("perm_invariant_sum is exact under permutation") {
  Rng rng(3);
  std::vector<double> xs(257);
  for (auto& x : xs) x = rng.uniform(-1.0, 1.0) * std::pow(10.0, rng.uniform(-12.0, 3.0));
  const double base = perm_invariant_sum(xs.data(), xs.size());
  for (int rep = 0; rep < 20; ++rep) {
    rng.shuffle(xs);
    CHECK(perm_invariant_sum(xs.data(), xs.size()) == base);
  }
  // sanity vs long-double reference
  long double ref = 0.0L;
  for (double x : xs) ref += static_cast<long double>(x);
  CHECK(std::fabs(base - static_cast<double>(ref)) < 1e-12 * std::max(1.0, std::fabs(static_cast<double>(ref))));

  const double zero = perm_invariant_sum(xs.data(), 0);
  CHECK(zero == 0.0);
}
