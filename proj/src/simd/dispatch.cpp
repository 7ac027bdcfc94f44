#include <cstdlib>
#include <string_view>

#include "brm/simd/kernels.hpp"

namespace brm::simd {
namespace {

const KernelTable& select() noexcept {
  const char* env = std::getenv("BRM_SIMD");
  const std::string_view wanted = env ? env : "";
  if (wanted == "scalar") return scalar_kernels();
  if (wanted == "avx2") return avx2_kernels() ? *avx2_kernels() : scalar_kernels();
  if (wanted == "neon") return neon_kernels() ? *neon_kernels() : scalar_kernels();
  if (const auto* t = avx2_kernels()) return *t;
  if (const auto* t = neon_kernels()) return *t;
  return scalar_kernels();
}

}  // namespace

const KernelTable& active() noexcept {
  static const KernelTable& table = select();
  return table;
}

std::string_view isa_name(Isa isa) noexcept {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "unknown";
}

}  // namespace brm::simd
