#pragma once

#include <span>

#include "brm/matrix.hpp"

namespace brm {

inline constexpr double kNormEpsilon = 1e-12;

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

/// v / |v|. Throws DegenerateNorm when |v| <= eps.
Vector l2_normalize(std::span<const double> v, double eps = kNormEpsilon);

/// upstream^T J with J = (I - x x^T) / |v|, x = v / |v|.
Vector l2_normalize_vjp(std::span<const double> v, std::span<const double> upstream,
                        double eps = kNormEpsilon);

/// a * b, accumulated per output entry in ascending k.
Matrix matmul(const Matrix& a, const Matrix& b);
/// a^T * b
Matrix matmul_at_b(const Matrix& a, const Matrix& b);
/// a * b^T
Matrix matmul_a_bt(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);

bool all_finite(std::span<const double> values) noexcept;

}  // namespace brm
