#include <cmath>

#include "brm/simd/kernels.hpp"

namespace brm::simd {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double sum_squares(const double* a, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * a[i];
  return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale(double alpha, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void bin_positions(const double* d, std::size_t n, double inv_delta, std::int32_t bins,
                   std::int32_t* lower, double* frac) {
  const double top = static_cast<double>(bins - 2);
  for (std::size_t i = 0; i < n; ++i) {
    const double pos = (d[i] + 1.0) * inv_delta;
    const double lo = std::fmin(std::fmax(std::floor(pos), 0.0), top);
    lower[i] = static_cast<std::int32_t>(lo);
    frac[i] = pos - lo;
  }
}

}  // namespace

const KernelTable& scalar_kernels() noexcept {
  static const KernelTable table{Isa::Scalar, dot, sum_squares, axpy, scale, bin_positions};
  return table;
}

}  // namespace brm::simd
