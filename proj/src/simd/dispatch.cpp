#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "coopsim/simd/kernels.hpp"

namespace coopsim::simd {

namespace {

struct KernelTable {
  decltype(&scalar::max_fuse) max_fuse;
  decltype(&scalar::select_by_max) select_by_max;
  decltype(&scalar::extrapolate_clamped) extrapolate_clamped;
  decltype(&scalar::finite_difference) finite_difference;
  decltype(&scalar::threshold) threshold;
  decltype(&scalar::axpy) axpy;
  decltype(&scalar::rotate_pairs) rotate_pairs;
  decltype(&scalar::blend) blend;
};

constexpr KernelTable kScalarTable{scalar::max_fuse,          scalar::select_by_max, scalar::extrapolate_clamped,
                                   scalar::finite_difference, scalar::threshold,     scalar::axpy,
                                   scalar::rotate_pairs,      scalar::blend};

#if COOPSIM_HAVE_AVX2_KERNELS
constexpr KernelTable kAvx2Table{avx2::max_fuse,          avx2::select_by_max, avx2::extrapolate_clamped,
                                 avx2::finite_difference, avx2::threshold,     avx2::axpy,
                                 avx2::rotate_pairs,      avx2::blend};
#endif

bool cpu_has_avx2() {
#if COOPSIM_HAVE_AVX2_KERNELS && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

const KernelTable& table_for(Isa isa) {
#if COOPSIM_HAVE_AVX2_KERNELS
  if (isa == Isa::Avx2) return kAvx2Table;
#endif
  (void)isa;
  return kScalarTable;
}

Isa initial_isa() {
  if (const char* env = std::getenv("COOPSIM_SIMD"); env && std::string(env) == "scalar") return Isa::Scalar;
  return detected_isa();
}

std::atomic<Isa>& active() {
  static std::atomic<Isa> isa{initial_isa()};
  return isa;
}

const KernelTable& kernels() { return table_for(active().load(std::memory_order_relaxed)); }

void require_same(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw std::invalid_argument(std::string(what) + ": length mismatch");
}

}  // namespace

std::string_view to_string(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

Isa detected_isa() { return cpu_has_avx2() ? Isa::Avx2 : Isa::Scalar; }
Isa active_isa() { return active().load(); }
bool isa_available(Isa isa) { return isa == Isa::Scalar || cpu_has_avx2(); }

void set_active_isa(Isa isa) {
  if (!isa_available(isa)) throw std::invalid_argument("ISA not available: " + std::string(to_string(isa)));
  active().store(isa);
}

void max_fuse(std::span<const float> a, std::span<const float> b, std::span<float> out) {
  require_same(a.size(), b.size(), "max_fuse");
  require_same(a.size(), out.size(), "max_fuse");
  kernels().max_fuse(a.data(), b.data(), out.data(), a.size());
}

void select_by_max(std::span<const float> a0, std::span<const float> a1, std::span<const float> b0,
                   std::span<const float> b1, std::span<float> out0, std::span<float> out1) {
  const std::size_t n = a0.size();
  for (std::size_t m : {a1.size(), b0.size(), b1.size(), out0.size(), out1.size()}) require_same(n, m, "select_by_max");
  kernels().select_by_max(a0.data(), a1.data(), b0.data(), b1.data(), out0.data(), out1.data(), n);
}

void extrapolate_clamped(std::span<const float> p0, std::span<const float> p1, float dt, std::span<float> out) {
  require_same(p0.size(), p1.size(), "extrapolate_clamped");
  require_same(p0.size(), out.size(), "extrapolate_clamped");
  kernels().extrapolate_clamped(p0.data(), p1.data(), dt, out.data(), p0.size());
}

void finite_difference(std::span<const float> prev, std::span<const float> curr, float dt, std::span<float> out) {
  require_same(prev.size(), curr.size(), "finite_difference");
  require_same(prev.size(), out.size(), "finite_difference");
  kernels().finite_difference(prev.data(), curr.data(), dt, out.data(), prev.size());
}

void threshold(std::span<const float> p, float theta, std::span<std::uint8_t> out) {
  require_same(p.size(), out.size(), "threshold");
  kernels().threshold(p.data(), theta, out.data(), p.size());
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  require_same(x.size(), y.size(), "axpy");
  kernels().axpy(a, x.data(), y.data(), x.size());
}

void rotate_pairs(double c, double s, std::span<double> v) {
  if (v.size() % 2 != 0) throw std::invalid_argument("rotate_pairs: odd length");
  kernels().rotate_pairs(c, s, v.data(), v.size());
}

void blend(double wa, std::span<const double> a, double wb, std::span<const double> b, std::span<double> out) {
  require_same(a.size(), b.size(), "blend");
  require_same(a.size(), out.size(), "blend");
  kernels().blend(wa, a.data(), wb, b.data(), out.data(), a.size());
}

}  // namespace coopsim::simd
