#include "tvts/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace tvts::kern {
namespace {

std::atomic<const Table*> g_active{nullptr};

bool cpu_has_avx2() {
#if TVTS_HAVE_AVX2_TU && (defined(__x86_64__) || defined(_M_X64))
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Table* resolve(Backend b) {
  if (b == Backend::auto_detect) {
    if (const char* env = std::getenv("TVTS_KERNELS")) {
      if (std::strcmp(env, "scalar") == 0) b = Backend::scalar;
      else if (std::strcmp(env, "avx2") == 0) b = Backend::avx2;
    }
  }
#if TVTS_HAVE_AVX2_TU
  if (b == Backend::avx2 || (b == Backend::auto_detect && cpu_has_avx2())) {
    if (cpu_has_avx2()) return &avx2_table();
  }
#endif
  return &scalar_table();
}

}  // namespace

const Table& active() {
  const Table* t = g_active.load(std::memory_order_acquire);
  if (!t) {
    t = resolve(Backend::auto_detect);
    g_active.store(t, std::memory_order_release);
  }
  return *t;
}

void force_backend(Backend b) { g_active.store(resolve(b), std::memory_order_release); }

bool avx2_available() { return cpu_has_avx2(); }

std::string active_name() { return active().name; }

}  // namespace tvts::kern
