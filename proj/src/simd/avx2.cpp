// Compiled with -mavx2 (no -mfma) when the compiler targets x86-64; the table
// is only handed out after a runtime CPU check.

#include "brm/simd/kernels.hpp"

#if defined(BRM_HAVE_AVX2)

#include <immintrin.h>

#include <cmath>

namespace brm::simd {
namespace {

// Lanes are combined as (l0 + l1) + (l2 + l3), then the scalar tail is added
// in ascending order.
double horizontal(__m256d v) {
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, v);
  return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  double total = horizontal(acc);
  for (; i < n; ++i) total += a[i] * b[i];
  return total;
}

double sum_squares(const double* a, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(a + i);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(v, v));
  }
  double total = horizontal(acc);
  for (; i < n; ++i) total += a[i] * a[i];
  return total;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale(double alpha, double* x, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) x[i] *= alpha;
}

void bin_positions(const double* d, std::size_t n, double inv_delta, std::int32_t bins,
                   std::int32_t* lower, double* frac) {
  const double top = static_cast<double>(bins - 2);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d vinv = _mm256_set1_pd(inv_delta);
  const __m256d vtop = _mm256_set1_pd(top);
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d pos = _mm256_mul_pd(_mm256_add_pd(_mm256_loadu_pd(d + i), one), vinv);
    const __m256d lo = _mm256_min_pd(_mm256_max_pd(_mm256_floor_pd(pos), zero), vtop);
    _mm_storeu_si128(reinterpret_cast<__m128i*>(lower + i), _mm256_cvttpd_epi32(lo));
    _mm256_storeu_pd(frac + i, _mm256_sub_pd(pos, lo));
  }
  for (; i < n; ++i) {
    const double pos = (d[i] + 1.0) * inv_delta;
    const double lo = std::fmin(std::fmax(std::floor(pos), 0.0), top);
    lower[i] = static_cast<std::int32_t>(lo);
    frac[i] = pos - lo;
  }
}

}  // namespace

const KernelTable* avx2_kernels() noexcept {
  static const KernelTable table{Isa::Avx2, dot, sum_squares, axpy, scale, bin_positions};
  static const bool supported = __builtin_cpu_supports("avx2");
  return supported ? &table : nullptr;
}

}  // namespace brm::simd

#else

namespace brm::simd {
const KernelTable* avx2_kernels() noexcept { return nullptr; }
}  // namespace brm::simd

#endif
