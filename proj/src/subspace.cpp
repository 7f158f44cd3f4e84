#include "shiftlab/subspace.hpp"

#include <algorithm>

namespace shiftlab {

namespace {

// One modified Gram-Schmidt sweep of v against the accepted basis.
void sweep_against(const std::vector<Vector>& basis, Vector& v) {
  for (const Vector& b : basis) {
    const double coeff = dot(b, v);
    axpy(-coeff, b, v);
  }
}

}  // namespace

Subspace orthonormalize(const std::vector<Vector>& vectors, double rank_tol) {
  Subspace result;
  if (vectors.empty()) return result;

  result.ambient_dim = vectors.front().size();
  double largest_norm = 0.0;
  for (const Vector& v : vectors) {
    if (v.size() != result.ambient_dim) {
      throw InvalidInputError("orthonormalize: mixed vector lengths");
    }
    if (!all_finite(v)) {
      throw InvalidInputError("orthonormalize: non-finite entries");
    }
    largest_norm = std::max(largest_norm, norm(v));
  }
  const double drop_below = rank_tol * largest_norm;

  for (const Vector& input : vectors) {
    Vector v = input;
    // Two passes: the second sweep removes the O(eps * kappa) residue the
    // first one leaves on nearly dependent inputs.
    sweep_against(result.basis, v);
    sweep_against(result.basis, v);
    const double residual = norm(v);
    if (residual <= drop_below) continue;
    scale(v, 1.0 / residual);
    result.basis.push_back(std::move(v));
  }
  return result;
}

Vector project(const Vector& v, const Subspace& s) {
  const bool empty_subspace = s.ambient_dim == 0 && s.rank() == 0;
  if (!empty_subspace && s.ambient_dim != v.size()) {
    throw InvalidInputError("project: dimension mismatch");
  }
  Vector out(v.size(), 0.0);
  for (const Vector& b : s.basis) {
    axpy(dot(b, v), b, out);
  }
  return out;
}

Vector project_complement(const Vector& v, const Subspace& s) {
  Vector out = v;
  const Vector in_part = project(v, s);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= in_part[i];
  return out;
}

}  // namespace shiftlab
