#include "brm/linalg.hpp"

#include <cmath>
#include <string>

#include "brm/error.hpp"
#include "brm/simd/kernels.hpp"

namespace brm {

namespace {

void require_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw Error(ErrorKind::DimensionMismatch,
                std::string(what) + ": lengths " + std::to_string(a) + " and " + std::to_string(b));
  }
}

double checked_norm(std::span<const double> v, double eps) {
  const double norm = l2_norm(v);
  if (!(norm > eps)) throw Error(ErrorKind::DegenerateNorm, "vector norm below epsilon");
  return norm;
}

}  // namespace

double dot(std::span<const double> a, std::span<const double> b) {
  require_same_length(a.size(), b.size(), "dot");
  return simd::active().dot(a.data(), b.data(), a.size());
}

double l2_norm(std::span<const double> v) {
  return std::sqrt(simd::active().sum_squares(v.data(), v.size()));
}

Vector l2_normalize(std::span<const double> v, double eps) {
  const double norm = checked_norm(v, eps);
  Vector out(v.begin(), v.end());
  for (double& x : out) x /= norm;
  return out;
}

Vector l2_normalize_vjp(std::span<const double> v, std::span<const double> upstream, double eps) {
  require_same_length(v.size(), upstream.size(), "l2_normalize_vjp");
  const double norm = checked_norm(v, eps);
  Vector x(v.begin(), v.end());
  for (double& e : x) e /= norm;
  const double radial = simd::active().dot(upstream.data(), x.data(), x.size());
  Vector out(upstream.begin(), upstream.end());
  simd::active().axpy(-radial, x.data(), out.data(), out.size());
  simd::active().scale(1.0 / norm, out.data(), out.size());
  return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "matmul: inner dimensions differ");
  }
  const auto& k = simd::active();
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* out = c.row(i).data();
    for (std::size_t p = 0; p < a.cols(); ++p) k.axpy(a(i, p), b.row(p).data(), out, b.cols());
  }
  return c;
}

Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "matmul_at_b: row counts differ");
  }
  const auto& k = simd::active();
  Matrix c(a.cols(), b.cols());
  for (std::size_t p = 0; p < a.rows(); ++p) {
    for (std::size_t i = 0; i < a.cols(); ++i) {
      k.axpy(a(p, i), b.row(p).data(), c.row(i).data(), b.cols());
    }
  }
  return c;
}

Matrix matmul_a_bt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "matmul_a_bt: column counts differ");
  }
  const auto& k = simd::active();
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) c(i, j) = k.dot(a.row(i).data(), b.row(j).data(), a.cols());
  }
  return c;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

bool all_finite(std::span<const double> values) noexcept {
  for (double v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace brm
