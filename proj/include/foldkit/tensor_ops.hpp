// tensor_ops.hpp — Kronecker/tensor linear-algebra kernel.
//
// Reshaping operators (vec / mat / arr), Kronecker products, the
// commutation and Kronecker-rearrangement permutations, projections onto
// column spaces, regularized symmetric-matrix powers, and subspace
// distances.  Everything downstream (moment targets, the alternating
// least-squares solver, the benchmarks) is built on these primitives.
//
// Conventions:
//   * vec stacks columns; element (i, j) of an r x s matrix lands at
//     flat index i + r*j.
//   * Permutation matrices are represented as index gathers and only
//     materialized densely on demand (they can be large).

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "foldkit/rng.hpp"

namespace foldkit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// ===========================================================================
// Errors
// ===========================================================================

// Shape or argument mismatch: the caller violated a dimensional contract.
class DimensionError : public std::invalid_argument {
 public:
  explicit DimensionError(const std::string& what)
      : std::invalid_argument(what) {}
};

// A matrix that must be inverted under the active inversion mode is
// numerically singular.  The message names the mode to switch to.
class SingularityError : public std::runtime_error {
 public:
  explicit SingularityError(const std::string& what)
      : std::runtime_error(what) {}
};

// ===========================================================================
// Inversion policy
// ===========================================================================

enum class InversionKind { exact, pseudo, ridge };

// How symmetric PSD matrices (covariances, normal matrices) are inverted:
//   exact  — plain inverse; singular input raises SingularityError.
//   pseudo — Moore-Penrose with relative rank tolerance rank_tol.
//   ridge  — all powers are taken of (S + epsilon*I) instead of S.
struct InversionMode {
  InversionKind kind = InversionKind::exact;
  double epsilon = 0.0;     // ridge shift (> 0 in ridge mode)
  double rank_tol = 1e-10;  // relative eigenvalue cutoff (pseudo mode)

  static InversionMode Exact() { return {}; }
  static InversionMode Pseudo(double tol = 1e-10) {
    InversionMode m;
    m.kind = InversionKind::pseudo;
    m.rank_tol = tol;
    return m;
  }
  static InversionMode Ridge(double eps) {
    InversionMode m;
    m.kind = InversionKind::ridge;
    m.epsilon = eps;
    return m;
  }
};

void validate(const InversionMode& mode);  // throws DimensionError if invalid
std::string to_string(const InversionMode& mode);

// ===========================================================================
// Reshaping
// ===========================================================================

// Stack the columns of m into one vector.
Vector vec(const Matrix& m);

// Inverse of vec for a known row count: mat(vec(M), rows(M)) == M.
Matrix mat(const Vector& v, Index rows);

// Minimal u-way array: flat storage with the first index changing fastest.
struct Array {
  std::vector<Index> dims;
  Vector data;

  double at(const std::vector<Index>& idx) const;
};

// Fold a flat vector into a u-way array (round-trips with vec_u).
Array arr(const Vector& v, std::vector<Index> dims);

// Flatten a u-way array back to the vector it was built from.
Vector vec_u(const Array& t);

// Kronecker product: block (i, j) of the result is a(i, j) * b.
Matrix kron(const Matrix& a, const Matrix& b);

// ===========================================================================
// Structured permutations
// ===========================================================================

// A permutation stored as a gather: apply(v)[i] == v[from[i]].
struct Permutation {
  std::vector<Index> from;

  Index size() const { return static_cast<Index>(from.size()); }
  Vector apply(const Vector& v) const;
  Matrix dense() const;
};

// Commutation permutation K_{r1,r2}: K * vec(A) == vec(A^T) for all
// r1 x r2 matrices A.
Permutation commutation_perm(Index r1, Index r2);
Matrix commutation_matrix(Index r1, Index r2);

// Kronecker rearrangement permutation: for b (pR x mR) and a (pL x mL),
//   vec(b (x) a) == Pi * (vec(b) (x) vec(a)).
Permutation pi_perm(Index p_r, Index m_r, Index p_l, Index m_l);
Matrix pi_matrix(Index p_r, Index m_r, Index p_l, Index m_l);

// ===========================================================================
// Projections and subspace geometry
// ===========================================================================

// Orthogonal projection onto the column space of basis.  Rank-deficient
// inputs are accepted (projection onto the actual column span).
Matrix projection(const Matrix& basis);

// Frobenius norm of the difference of the two column-space projections.
double subspace_distance(const Matrix& basis1, const Matrix& basis2);

// ===========================================================================
// Regularized symmetric powers
// ===========================================================================

// Inverse, symmetric square root, and inverse square root of a symmetric
// PSD matrix under the given mode.  Eigenvalues slightly negative from
// roundoff (>= -1e-8 * lambda_max) are clamped to zero.
Matrix regularized_inverse(const Matrix& s, const InversionMode& mode);
Matrix regularized_sqrt(const Matrix& s, const InversionMode& mode);
Matrix regularized_inverse_sqrt(const Matrix& s, const InversionMode& mode);

// ===========================================================================
// Benchmark distance
// ===========================================================================

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

// Monte-Carlo estimate of the expected subspace distance between a fixed
// Kronecker-product subspace kron(beta, alpha) (dL, dR columns in ambient
// pL, pR) and the Kronecker product of two independent standard-normal
// random bases.  Calibrates how far from the truth a blind guess lands.
MeanSe benchmark_distance(Index p_l, Index p_r, Index d_l, Index d_r,
                          int reps, Rng& rng);

}  // namespace foldkit
