#pragma once

#include <cstddef>
#include <vector>

#include "shiftlab/matrix.hpp"

// Orthonormal bases and projections. A Subspace is a list of orthonormal
// vectors in a common ambient dimension; rank 0 (empty basis) is valid and
// projects everything to zero.

namespace shiftlab {

struct Subspace {
  std::size_t ambient_dim = 0;
  std::vector<Vector> basis;  // each of length ambient_dim, orthonormal

  std::size_t rank() const { return basis.size(); }
};

// Modified Gram-Schmidt with a second re-orthogonalization pass. Vectors
// whose residual falls below rank_tol times the largest input norm are
// dropped, so near-duplicates reduce the rank instead of polluting the basis.
// Resulting basis vectors are pairwise orthonormal within 1e-10 (tested).
// Empty input yields an empty subspace with ambient_dim 0.
Subspace orthonormalize(const std::vector<Vector>& vectors,
                        double rank_tol = 1e-10);

// Sum of basis projections; exact zero vector for rank-0 subspaces.
Vector project(const Vector& v, const Subspace& s);

// v - project(v, s); project + project_complement reassemble v exactly.
Vector project_complement(const Vector& v, const Subspace& s);

}  // namespace shiftlab
