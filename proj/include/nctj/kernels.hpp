#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace nctj::kern {

// Inner-loop primitives behind the tensor engine. `matmul_packed` computes
//
//   out[i*r + j] = sum_t a[i*q + t] * bt[j*q + t]
//
// i.e. A (p x q) times the transpose of bt (r x q); both operands are read
// row-major so every dot product runs over contiguous memory. Reductions
// accumulate in double. `_acc` adds into `out` instead of overwriting.
//
// Every variant keeps a fixed reduction order, so results are
// bit-deterministic per kernel set; scalar and SIMD sets agree to rounding
// (equivalence-tested, not bit-equal for the double accumulators).
struct Kernels {
  const char* name;
  void (*matmul_packed)(const float* a, const float* bt, float* out, int p, int q, int r);
  void (*matmul_packed_acc)(const float* a, const float* bt, float* out, int p, int q, int r);
  void (*relu_fwd)(const float* x, float* y, size_t n);
  // dx[i] += x[i] > 0 ? dy[i] : 0
  void (*relu_bwd_acc)(const float* x, const float* dy, float* dx, size_t n);
  // v = momentum*v + g + weight_decay*p;  p -= lr*v   (elementwise f32)
  void (*sgd_update)(float* param, float* vel, const float* grad, size_t n,
                     float lr, float momentum, float weight_decay);
  void (*add_acc)(float* dst, const float* src, size_t n);
  bool (*all_finite)(const float* x, size_t n);
};

const Kernels& scalar_kernels();
#if defined(__x86_64__) || defined(_M_X64)
const Kernels& avx2_kernels();  // only valid to use when cpu_supports_avx2()
#endif

bool cpu_supports_avx2();

// Runtime selection. "auto" picks the widest supported variant at first use.
void select_kernels(const std::string& name);  // "auto" | "scalar" | "avx2"
const Kernels& active_kernels();
std::vector<std::string> available_kernels();

}  // namespace nctj::kern
