#include "coopsim/simd/kernels.hpp"

namespace coopsim::simd::scalar {

namespace {
// Operand order matches _mm256_max_ps / _mm256_min_ps: the second operand is
// returned when the comparison is false.
inline float max_like(float a, float b) { return a > b ? a : b; }
inline float min_like(float a, float b) { return a < b ? a : b; }
}  // namespace

void max_fuse(const float* a, const float* b, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = max_like(a[i], b[i]);
}

void select_by_max(const float* a0, const float* a1, const float* b0, const float* b1, float* out0, float* out1,
                   std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const bool take_a = a0[i] > b0[i];
    out0[i] = take_a ? a0[i] : b0[i];
    out1[i] = take_a ? a1[i] : b1[i];
  }
}

void extrapolate_clamped(const float* p0, const float* p1, float dt, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const float prod = dt * p1[i];
    const float v = p0[i] + prod;
    out[i] = min_like(max_like(v, 0.0f), 1.0f);
  }
}

void finite_difference(const float* prev, const float* curr, float dt, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = (curr[i] - prev[i]) / dt;
}

void threshold(const float* p, float theta, std::uint8_t* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = p[i] >= theta ? 1 : 0;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double prod = a * x[i];
    y[i] = y[i] + prod;
  }
}

void rotate_pairs(double c, double s, double* v, std::size_t n) {
  for (std::size_t i = 0; i + 1 < n; i += 2) {
    const double x = v[i];
    const double y = v[i + 1];
    const double cx = c * x;
    const double cy = c * y;
    const double sx = s * x;
    const double nsy = -s * y;
    v[i] = cx + nsy;
    v[i + 1] = cy + sx;
  }
}

void blend(double wa, const double* a, double wb, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double pa = wa * a[i];
    const double pb = wb * b[i];
    out[i] = pa + pb;
  }
}

}  // namespace coopsim::simd::scalar
