#pragma once

// Data-parallel inner loops shared by the fusion pipeline.
//
// Every kernel has a scalar reference implementation (always built) and an
// AVX2 variant (x86-64 only, compiled in its own translation unit with
// -mavx2). The public entry points dispatch through a table selected at
// startup from CPUID; COOPSIM_SIMD=scalar forces the reference path.
//
// The variants are bit-identical: both use separate multiply and add (no
// FMA contraction), and the scalar max/min/clamp mirror the operand order
// of _mm256_max_ps/_mm256_min_ps so signed zeros come out the same.

#include <cstdint>
#include <span>
#include <string_view>

namespace coopsim::simd {

enum class Isa { Scalar, Avx2 };

std::string_view to_string(Isa isa);

// Best ISA this binary and CPU both support.
Isa detected_isa();
Isa active_isa();
// Throws std::invalid_argument if `isa` is not available.
void set_active_isa(Isa isa);
bool isa_available(Isa isa);

// out[i] = a[i] > b[i] ? a[i] : b[i]
void max_fuse(std::span<const float> a, std::span<const float> b, std::span<float> out);

// Per cell picks the side with the larger p0 (ties go to b) and copies its p1 too.
void select_by_max(std::span<const float> a0, std::span<const float> a1, std::span<const float> b0,
                   std::span<const float> b1, std::span<float> out0, std::span<float> out1);

// out[i] = clamp(p0[i] + dt * p1[i], 0, 1)
void extrapolate_clamped(std::span<const float> p0, std::span<const float> p1, float dt, std::span<float> out);

// out[i] = (curr[i] - prev[i]) / dt
void finite_difference(std::span<const float> prev, std::span<const float> curr, float dt, std::span<float> out);

// out[i] = p[i] >= theta
void threshold(std::span<const float> p, float theta, std::span<std::uint8_t> out);

// y[i] += a * x[i]
void axpy(double a, std::span<const double> x, std::span<double> y);

// Rotates each pair (v[2k], v[2k+1]) by the angle with cosine c and sine s.
void rotate_pairs(double c, double s, std::span<double> v);

// out[i] = wa * a[i] + wb * b[i]
void blend(double wa, std::span<const double> a, double wb, std::span<const double> b, std::span<double> out);

// Direct access to each implementation, for equivalence tests and benchmarks.
namespace scalar {
void max_fuse(const float* a, const float* b, float* out, std::size_t n);
void select_by_max(const float* a0, const float* a1, const float* b0, const float* b1, float* out0, float* out1,
                   std::size_t n);
void extrapolate_clamped(const float* p0, const float* p1, float dt, float* out, std::size_t n);
void finite_difference(const float* prev, const float* curr, float dt, float* out, std::size_t n);
void threshold(const float* p, float theta, std::uint8_t* out, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
void rotate_pairs(double c, double s, double* v, std::size_t n);
void blend(double wa, const double* a, double wb, const double* b, double* out, std::size_t n);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define COOPSIM_HAVE_AVX2_KERNELS 1
namespace avx2 {
void max_fuse(const float* a, const float* b, float* out, std::size_t n);
void select_by_max(const float* a0, const float* a1, const float* b0, const float* b1, float* out0, float* out1,
                   std::size_t n);
void extrapolate_clamped(const float* p0, const float* p1, float dt, float* out, std::size_t n);
void finite_difference(const float* prev, const float* curr, float dt, float* out, std::size_t n);
void threshold(const float* p, float theta, std::uint8_t* out, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
void rotate_pairs(double c, double s, double* v, std::size_t n);
void blend(double wa, const double* a, double wb, const double* b, double* out, std::size_t n);
}  // namespace avx2
#else
#define COOPSIM_HAVE_AVX2_KERNELS 0
#endif

}  // namespace coopsim::simd
