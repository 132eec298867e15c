#include <cmath>

#include "nctj/kernels.hpp"

// Reference kernels. Plain sequential loops, double accumulators for the
// reductions; the SIMD variants are equivalence-tested against these.

namespace nctj::kern {

namespace {

template <bool Accumulate>
void matmul_packed_impl(const float* a, const float* bt, float* out, int p, int q, int r) {
  for (int i = 0; i < p; ++i) {
    const float* ai = a + static_cast<size_t>(i) * q;
    float* oi = out + static_cast<size_t>(i) * r;
    for (int j = 0; j < r; ++j) {
      const float* bj = bt + static_cast<size_t>(j) * q;
      double acc = 0.0;
      for (int t = 0; t < q; ++t) {
        acc += static_cast<double>(ai[t]) * static_cast<double>(bj[t]);
      }
      if (Accumulate) {
        oi[j] += static_cast<float>(acc);
      } else {
        oi[j] = static_cast<float>(acc);
      }
    }
  }
}

void relu_fwd_impl(const float* x, float* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_bwd_acc_impl(const float* x, const float* dy, float* dx, size_t n) {
  for (size_t i = 0; i < n; ++i) {
    if (x[i] > 0.0f) dx[i] += dy[i];
  }
}

void sgd_update_impl(float* param, float* vel, const float* grad, size_t n,
                     float lr, float momentum, float weight_decay) {
  for (size_t i = 0; i < n; ++i) {
    float v = momentum * vel[i] + grad[i] + weight_decay * param[i];
    vel[i] = v;
    param[i] = param[i] - lr * v;
  }
}

void add_acc_impl(float* dst, const float* src, size_t n) {
  for (size_t i = 0; i < n; ++i) dst[i] += src[i];
}

bool all_finite_impl(const float* x, size_t n) {
  for (size_t i = 0; i < n; ++i) {
    if (!std::isfinite(x[i])) return false;
  }
  return true;
}

}  // namespace

const Kernels& scalar_kernels() {
  static const Kernels k = {
      "scalar",
      &matmul_packed_impl<false>,
      &matmul_packed_impl<true>,
      &relu_fwd_impl,
      &relu_bwd_acc_impl,
      &sgd_update_impl,
      &add_acc_impl,
      &all_finite_impl,
  };
  return k;
}

}  // namespace nctj::kern
