#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "shiftlab/errors.hpp"

// Dense row-major matrix plus the handful of vector helpers the lab needs.
// Everything here is deliberately small: ambient dimensions stay in the tens
// and sample counts in the tens of thousands.

namespace shiftlab {

using Vector = std::vector<double>;

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> entries;  // row-major, rows * cols values

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c)
      : rows(r), cols(c), entries(r * c, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return entries[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const {
    return entries[r * cols + c];
  }

  std::span<double> row(std::size_t r) {
    return {entries.data() + r * cols, cols};
  }
  std::span<const double> row(std::size_t r) const {
    return {entries.data() + r * cols, cols};
  }
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double squared_norm(std::span<const double> v) { return dot(v, v); }

inline double norm(std::span<const double> v) {
  return std::sqrt(squared_norm(v));
}

// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline void scale(std::span<double> v, double alpha) {
  for (double& value : v) value *= alpha;
}

inline bool all_finite(std::span<const double> v) {
  for (double value : v) {
    if (!std::isfinite(value)) return false;
  }
  return true;
}

// y = m * x (length rows), x of length cols.
Vector matvec(const Matrix& m, std::span<const double> x);

// y = m^T * x (length cols), x of length rows.
Vector matvec_transposed(const Matrix& m, std::span<const double> x);

// Largest singular value via power iteration on m^T m with a seeded start
// vector. Successive estimates must agree to a relative tol / 10 before the
// loop stops; the spare factor covers the gap between successive-difference
// convergence and true error.
double operator_norm(const Matrix& m, double tol = 1e-10,
                     std::uint64_t seed = 0x0eaffab1eULL);

}  // namespace shiftlab
