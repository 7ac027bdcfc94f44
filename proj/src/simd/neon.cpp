#include "brm/simd/kernels.hpp"

#if defined(__aarch64__) && defined(__ARM_NEON)

#include <arm_neon.h>

#include <cmath>

namespace brm::simd {
namespace {

// Two 2-lane accumulators, combined as (a0 + a1) + (b0 + b1).
double dot(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vaddq_f64(acc0, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    acc1 = vaddq_f64(acc1, vmulq_f64(vld1q_f64(a + i + 2), vld1q_f64(b + i + 2)));
  }
  double total = (vgetq_lane_f64(acc0, 0) + vgetq_lane_f64(acc0, 1)) +
                 (vgetq_lane_f64(acc1, 0) + vgetq_lane_f64(acc1, 1));
  for (; i < n; ++i) total += a[i] * b[i];
  return total;
}

double sum_squares(const double* a, std::size_t n) { return dot(a, a, n); }

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vmulq_f64(va, vld1q_f64(x + i))));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale(double alpha, double* x, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(x + i, vmulq_f64(va, vld1q_f64(x + i)));
  for (; i < n; ++i) x[i] *= alpha;
}

void bin_positions(const double* d, std::size_t n, double inv_delta, std::int32_t bins,
                   std::int32_t* lower, double* frac) {
  const double top = static_cast<double>(bins - 2);
  const float64x2_t one = vdupq_n_f64(1.0);
  const float64x2_t vinv = vdupq_n_f64(inv_delta);
  const float64x2_t vtop = vdupq_n_f64(top);
  const float64x2_t zero = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t pos = vmulq_f64(vaddq_f64(vld1q_f64(d + i), one), vinv);
    const float64x2_t lo = vminq_f64(vmaxq_f64(vrndmq_f64(pos), zero), vtop);
    lower[i] = static_cast<std::int32_t>(vgetq_lane_f64(lo, 0));
    lower[i + 1] = static_cast<std::int32_t>(vgetq_lane_f64(lo, 1));
    vst1q_f64(frac + i, vsubq_f64(pos, lo));
  }
  for (; i < n; ++i) {
    const double pos = (d[i] + 1.0) * inv_delta;
    const double lo = std::fmin(std::fmax(std::floor(pos), 0.0), top);
    lower[i] = static_cast<std::int32_t>(lo);
    frac[i] = pos - lo;
  }
}

}  // namespace

const KernelTable* neon_kernels() noexcept {
  static const KernelTable table{Isa::Neon, dot, sum_squares, axpy, scale, bin_positions};
  return &table;
}

}  // namespace brm::simd

#else

namespace brm::simd {
const KernelTable* neon_kernels() noexcept { return nullptr; }
}  // namespace brm::simd

#endif
