// Compiled with -mavx2 on x86-64 only; reached through the dispatcher after a
// CPUID check.
#include <immintrin.h>

#include "coopsim/simd/kernels.hpp"

namespace coopsim::simd::avx2 {

void max_fuse(const float* a, const float* b, float* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(out + i, _mm256_max_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  }
  scalar::max_fuse(a + i, b + i, out + i, n - i);
}

void select_by_max(const float* a0, const float* a1, const float* b0, const float* b1, float* out0, float* out1,
                   std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 va0 = _mm256_loadu_ps(a0 + i);
    const __m256 vb0 = _mm256_loadu_ps(b0 + i);
    const __m256 take_a = _mm256_cmp_ps(va0, vb0, _CMP_GT_OQ);
    _mm256_storeu_ps(out0 + i, _mm256_blendv_ps(vb0, va0, take_a));
    _mm256_storeu_ps(out1 + i, _mm256_blendv_ps(_mm256_loadu_ps(b1 + i), _mm256_loadu_ps(a1 + i), take_a));
  }
  scalar::select_by_max(a0 + i, a1 + i, b0 + i, b1 + i, out0 + i, out1 + i, n - i);
}

void extrapolate_clamped(const float* p0, const float* p1, float dt, float* out, std::size_t n) {
  const __m256 vdt = _mm256_set1_ps(dt);
  const __m256 zero = _mm256_setzero_ps();
  const __m256 one = _mm256_set1_ps(1.0f);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_add_ps(_mm256_loadu_ps(p0 + i), _mm256_mul_ps(vdt, _mm256_loadu_ps(p1 + i)));
    _mm256_storeu_ps(out + i, _mm256_min_ps(_mm256_max_ps(v, zero), one));
  }
  scalar::extrapolate_clamped(p0 + i, p1 + i, dt, out + i, n - i);
}

void finite_difference(const float* prev, const float* curr, float dt, float* out, std::size_t n) {
  const __m256 vdt = _mm256_set1_ps(dt);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 d = _mm256_sub_ps(_mm256_loadu_ps(curr + i), _mm256_loadu_ps(prev + i));
    _mm256_storeu_ps(out + i, _mm256_div_ps(d, vdt));
  }
  scalar::finite_difference(prev + i, curr + i, dt, out + i, n - i);
}

void threshold(const float* p, float theta, std::uint8_t* out, std::size_t n) {
  const __m256 vt = _mm256_set1_ps(theta);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const int bits = _mm256_movemask_ps(_mm256_cmp_ps(_mm256_loadu_ps(p + i), vt, _CMP_GE_OQ));
    for (int k = 0; k < 8; ++k) out[i + k] = static_cast<std::uint8_t>((bits >> k) & 1);
  }
  scalar::threshold(p + i, theta, out + i, n - i);
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  scalar::axpy(a, x + i, y + i, n - i);
}

void rotate_pairs(double c, double s, double* v, std::size_t n) {
  const __m256d vc = _mm256_set1_pd(c);
  // Lane pattern (-s, s, -s, s) applied to the pair-swapped vector.
  const __m256d vs = _mm256_set_pd(s, -s, s, -s);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d x = _mm256_loadu_pd(v + i);
    const __m256d swapped = _mm256_permute_pd(x, 0b0101);
    _mm256_storeu_pd(v + i, _mm256_add_pd(_mm256_mul_pd(vc, x), _mm256_mul_pd(vs, swapped)));
  }
  scalar::rotate_pairs(c, s, v + i, n - i);
}

void blend(double wa, const double* a, double wb, const double* b, double* out, std::size_t n) {
  const __m256d vwa = _mm256_set1_pd(wa);
  const __m256d vwb = _mm256_set1_pd(wb);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d pa = _mm256_mul_pd(vwa, _mm256_loadu_pd(a + i));
    const __m256d pb = _mm256_mul_pd(vwb, _mm256_loadu_pd(b + i));
    _mm256_storeu_pd(out + i, _mm256_add_pd(pa, pb));
  }
  scalar::blend(wa, a + i, wb, b + i, out + i, n - i);
}

}  // namespace coopsim::simd::avx2
