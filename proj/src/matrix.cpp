#include "shiftlab/matrix.hpp"

#include <algorithm>
#include <cstdint>

#include "shiftlab/rng.hpp"

namespace shiftlab {

Vector matvec(const Matrix& m, std::span<const double> x) {
  if (x.size() != m.cols) {
    throw InvalidInputError("matvec: vector length does not match cols");
  }
  Vector out(m.rows, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    out[r] = dot(m.row(r), x);
  }
  return out;
}

Vector matvec_transposed(const Matrix& m, std::span<const double> x) {
  if (x.size() != m.rows) {
    throw InvalidInputError("matvec_transposed: vector length does not match rows");
  }
  Vector out(m.cols, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    axpy(x[r], m.row(r), out);
  }
  return out;
}

double operator_norm(const Matrix& m, double tol, std::uint64_t seed) {
  if (m.rows == 0 || m.cols == 0) return 0.0;
  if (!all_finite(m.entries)) {
    throw InvalidInputError("operator_norm: non-finite entries");
  }

  double frobenius = 0.0;
  for (double e : m.entries) frobenius += e * e;
  if (frobenius == 0.0) return 0.0;

  Rng rng(seed);
  Vector v(m.cols);
  for (double& value : v) value = rng.uniform(-1.0, 1.0);
  const double v_norm = norm(v);
  scale(v, 1.0 / v_norm);

  // Rayleigh quotient of m^T m converges to the top eigenvalue from below;
  // stop when successive sigma estimates agree to tol / 10.
  const double stop = std::max(tol * 0.1, 1e-15);
  double sigma = 0.0;
  const std::size_t max_iters = 200000;
  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    Vector w = matvec_transposed(m, matvec(m, v));
    const double w_norm = norm(w);
    if (w_norm == 0.0) return 0.0;  // start vector fell in the null space
    const double next = std::sqrt(w_norm);
    scale(w, 1.0 / w_norm);
    v = std::move(w);
    if (iter > 0 && std::abs(next - sigma) <= stop * std::max(next, 1.0)) {
      return next;
    }
    sigma = next;
  }
  return sigma;
}

}  // namespace shiftlab
