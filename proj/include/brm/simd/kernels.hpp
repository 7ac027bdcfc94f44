#pragma once

// Data-parallel inner loops used by the numeric core. Each instruction set
// provides the same table; the active one is chosen once at first use from
// the CPU's capabilities (override with BRM_SIMD=scalar|avx2|neon).
//
// Elementwise kernels (axpy, scale, bin_positions) are bit-identical across
// all variants: they do one rounding per operation and never fuse multiply
// and add. Reductions (dot, sum_squares) accumulate in a fixed lane order per
// variant, so each variant is deterministic but variants differ from the
// scalar reference by rounding only.

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace brm::simd {

enum class Isa { Scalar, Avx2, Neon };

struct KernelTable {
  Isa isa;
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*sum_squares)(const double* a, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // x[i] *= alpha
  void (*scale)(double alpha, double* x, std::size_t n);
  // For distances d in [-1, 1] on R nodes with spacing 1/inv_delta:
  // lower[i] = min(floor((d + 1) * inv_delta), R - 2), frac[i] = (d + 1) * inv_delta - lower[i].
  void (*bin_positions)(const double* d, std::size_t n, double inv_delta, std::int32_t bins,
                        std::int32_t* lower, double* frac);
};

const KernelTable& scalar_kernels() noexcept;
/// nullptr when the variant was not compiled in or the CPU lacks support.
const KernelTable* avx2_kernels() noexcept;
const KernelTable* neon_kernels() noexcept;

/// Table selected for this process.
const KernelTable& active() noexcept;

std::string_view isa_name(Isa isa) noexcept;

}  // namespace brm::simd
