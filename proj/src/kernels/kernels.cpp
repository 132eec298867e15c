#include "nctj/kernels.hpp"

#include "nctj/common.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <cpuid.h>
#endif

namespace nctj::kern {

#if defined(__x86_64__) || defined(_M_X64)
namespace {
unsigned read_xcr0() {
  unsigned eax = 0, edx = 0;
  __asm__ volatile("xgetbv" : "=a"(eax), "=d"(edx) : "c"(0));
  (void)edx;
  return eax;
}
}  // namespace
#endif

bool cpu_supports_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
  unsigned eax = 0, ebx = 0, ecx = 0, edx = 0;
  if (!__get_cpuid_count(7, 0, &eax, &ebx, &ecx, &edx)) return false;
  bool avx2 = (ebx & (1u << 5)) != 0;
  if (!__get_cpuid(1, &eax, &ebx, &ecx, &edx)) return false;
  bool fma = (ecx & (1u << 12)) != 0;
  bool osxsave = (ecx & (1u << 27)) != 0;
  if (!osxsave) return false;
  // XCR0: xmm and ymm state must be enabled by the OS.
  return avx2 && fma && ((read_xcr0() & 0x6) == 0x6);
#else
  return false;
#endif
}

namespace {

const Kernels* resolve(const std::string& name) {
  if (name == "scalar") return &scalar_kernels();
#if defined(__x86_64__) || defined(_M_X64)
  if (name == "avx2") {
    if (!cpu_supports_avx2()) throw ArgumentError("kernels: avx2 not supported by this CPU");
    return &avx2_kernels();
  }
#endif
  if (name == "auto") {
#if defined(__x86_64__) || defined(_M_X64)
    if (cpu_supports_avx2()) return &avx2_kernels();
#endif
    return &scalar_kernels();
  }
  throw ArgumentError("kernels: unknown variant '" + name + "'");
}

const Kernels*& active_slot() {
  static const Kernels* active = resolve("auto");
  return active;
}

}  // namespace

void select_kernels(const std::string& name) { active_slot() = resolve(name); }

const Kernels& active_kernels() { return *active_slot(); }

std::vector<std::string> available_kernels() {
  std::vector<std::string> out = {"scalar"};
#if defined(__x86_64__) || defined(_M_X64)
  if (cpu_supports_avx2()) out.push_back("avx2");
#endif
  return out;
}

}  // namespace nctj::kern
