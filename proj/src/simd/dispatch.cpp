#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "pafrob/simd/kernels.hpp"

namespace pafrob::simd {

#ifdef PAFROB_HAVE_AVX2
namespace detail {
const KernelTable& avx2_table();
}
#endif

namespace {

const KernelTable* choose_default() {
  if (const char* env = std::getenv("PAFROB_SIMD"); env != nullptr) {
    if (std::string(env) == "scalar") return &scalar_kernels();
  }
  if (const KernelTable* t = avx2_kernels(); t != nullptr) return t;
  return &scalar_kernels();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{choose_default()};
  return table;
}

}  // namespace

bool cpu_supports_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* avx2_kernels() {
#ifdef PAFROB_HAVE_AVX2
  if (cpu_supports_avx2()) return &detail::avx2_table();
#endif
  return nullptr;
}

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

void select(Backend backend) {
  const KernelTable* table = nullptr;
  switch (backend) {
    case Backend::Scalar: table = &scalar_kernels(); break;
    case Backend::Avx2: table = avx2_kernels(); break;
  }
  if (table == nullptr)
    throw std::runtime_error("kernel backend '" + std::string(backend_name(backend)) +
                             "' is not available on this machine");
  current().store(table, std::memory_order_release);
}

std::string_view backend_name(Backend backend) {
  switch (backend) {
    case Backend::Scalar: return "scalar";
    case Backend::Avx2: return "avx2";
  }
  return "unknown";
}

}  // namespace pafrob::simd
