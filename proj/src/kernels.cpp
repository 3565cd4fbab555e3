#include "sasv/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string_view>

namespace sasv::kernels {

#if defined(SASV_HAVE_AVX2)
namespace detail {
const KernelTable &avx2_table() noexcept;
}
#endif

const KernelTable *avx2_kernels() noexcept {
#if defined(SASV_HAVE_AVX2)
  static const bool supported = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  }();
  return supported ? &detail::avx2_table() : nullptr;
#else
  return nullptr;
#endif
}

namespace {

const KernelTable *select_default() noexcept {
  if (const char *env = std::getenv("SASV_KERNELS");
      env != nullptr && std::string_view(env) == "scalar")
    return &scalar_kernels();
  if (const KernelTable *t = avx2_kernels())
    return t;
  return &scalar_kernels();
}

std::atomic<const KernelTable *> &slot() noexcept {
  static std::atomic<const KernelTable *> s{select_default()};
  return s;
}

} // namespace

const KernelTable &active() noexcept { return *slot().load(std::memory_order_acquire); }

void set_active(const KernelTable &table) noexcept {
  slot().store(&table, std::memory_order_release);
}

} // namespace sasv::kernels
