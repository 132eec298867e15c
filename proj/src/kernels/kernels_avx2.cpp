// AVX2/FMA kernel set. Compiled with -mavx2 -mfma in its own TU; only
// reachable through the runtime dispatcher after a cpuid check.
//
// Dot products widen f32 lanes to f64 and keep two 4-lane accumulators;
// f32->f64 products are exact, so FMA here equals mul+add and the only
// difference from the scalar kernels is the lane-blocked summation order.
// The elementwise kernels (relu, sgd, add) use mul/add without contraction
// and match the scalar results bit for bit.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>

#include "nctj/kernels.hpp"

namespace nctj::kern {

namespace {

inline double dot_f64acc(const float* x, const float* y, int n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  int t = 0;
  for (; t + 8 <= n; t += 8) {
    __m256 xv = _mm256_loadu_ps(x + t);
    __m256 yv = _mm256_loadu_ps(y + t);
    __m256d xlo = _mm256_cvtps_pd(_mm256_castps256_ps128(xv));
    __m256d ylo = _mm256_cvtps_pd(_mm256_castps256_ps128(yv));
    __m256d xhi = _mm256_cvtps_pd(_mm256_extractf128_ps(xv, 1));
    __m256d yhi = _mm256_cvtps_pd(_mm256_extractf128_ps(yv, 1));
    acc0 = _mm256_fmadd_pd(xlo, ylo, acc0);
    acc1 = _mm256_fmadd_pd(xhi, yhi, acc1);
  }
  __m256d acc = _mm256_add_pd(acc0, acc1);
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double s = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; t < n; ++t) s += static_cast<double>(x[t]) * static_cast<double>(y[t]);
  return s;
}

template <bool Accumulate>
void matmul_packed_impl(const float* a, const float* bt, float* out, int p, int q, int r) {
  for (int i = 0; i < p; ++i) {
    const float* ai = a + static_cast<size_t>(i) * q;
    float* oi = out + static_cast<size_t>(i) * r;
    for (int j = 0; j < r; ++j) {
      double acc = dot_f64acc(ai, bt + static_cast<size_t>(j) * q, q);
      if (Accumulate) {
        oi[j] += static_cast<float>(acc);
      } else {
        oi[j] = static_cast<float>(acc);
      }
    }
  }
}

void relu_fwd_impl(const float* x, float* y, size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(y + i, _mm256_max_ps(_mm256_loadu_ps(x + i), zero));
  }
  for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_bwd_acc_impl(const float* x, const float* dy, float* dx, size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(x + i), zero, _CMP_GT_OQ);
    __m256 add = _mm256_and_ps(_mm256_loadu_ps(dy + i), mask);
    _mm256_storeu_ps(dx + i, _mm256_add_ps(_mm256_loadu_ps(dx + i), add));
  }
  for (; i < n; ++i) {
    if (x[i] > 0.0f) dx[i] += dy[i];
  }
}

void sgd_update_impl(float* param, float* vel, const float* grad, size_t n,
                     float lr, float momentum, float weight_decay) {
  const __m256 mom = _mm256_set1_ps(momentum);
  const __m256 wd = _mm256_set1_ps(weight_decay);
  const __m256 lrv = _mm256_set1_ps(lr);
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 p = _mm256_loadu_ps(param + i);
    __m256 v = _mm256_loadu_ps(vel + i);
    __m256 g = _mm256_loadu_ps(grad + i);
    // same rounding sequence as the scalar kernel: ((mom*v)+g)+(wd*p)
    v = _mm256_add_ps(_mm256_add_ps(_mm256_mul_ps(mom, v), g), _mm256_mul_ps(wd, p));
    p = _mm256_sub_ps(p, _mm256_mul_ps(lrv, v));
    _mm256_storeu_ps(vel + i, v);
    _mm256_storeu_ps(param + i, p);
  }
  for (; i < n; ++i) {
    float v = momentum * vel[i] + grad[i] + weight_decay * param[i];
    vel[i] = v;
    param[i] = param[i] - lr * v;
  }
}

void add_acc_impl(float* dst, const float* src, size_t n) {
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(dst + i, _mm256_add_ps(_mm256_loadu_ps(dst + i), _mm256_loadu_ps(src + i)));
  }
  for (; i < n; ++i) dst[i] += src[i];
}

bool all_finite_impl(const float* x, size_t n) {
  // finite iff |x| < inf; NaN compares false, so accumulate "not finite".
  const __m256 inf = _mm256_set1_ps(__builtin_inff());
  const __m256 absmask = _mm256_castsi256_ps(_mm256_set1_epi32(0x7fffffff));
  __m256 bad = _mm256_setzero_ps();
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 ax = _mm256_and_ps(_mm256_loadu_ps(x + i), absmask);
    bad = _mm256_or_ps(bad, _mm256_cmp_ps(ax, inf, _CMP_NLT_UQ));
  }
  if (_mm256_movemask_ps(bad) != 0) return false;
  for (; i < n; ++i) {
    if (!std::isfinite(x[i])) return false;
  }
  return true;
}

}  // namespace

const Kernels& avx2_kernels() {
  static const Kernels k = {
      "avx2",
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

#endif  // x86_64
