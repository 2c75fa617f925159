// tensor_ops.cpp — implementation of the Kronecker/tensor kernel.

#include "foldkit/tensor_ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace foldkit {

// ===========================================================================
// Inversion policy
// ===========================================================================

void validate(const InversionMode& mode) {
  if (mode.kind == InversionKind::ridge && !(mode.epsilon > 0.0))
    throw DimensionError("ridge inversion requires epsilon > 0");
  if (mode.kind == InversionKind::pseudo && !(mode.rank_tol > 0.0))
    throw DimensionError("pseudo inversion requires rank_tol > 0");
}

std::string to_string(const InversionMode& mode) {
  switch (mode.kind) {
    case InversionKind::exact:
      return "exact";
    case InversionKind::pseudo:
      return "pseudo";
    case InversionKind::ridge:
      return "ridge(epsilon=" + std::to_string(mode.epsilon) + ")";
  }
  return "unknown";
}

// ===========================================================================
// Reshaping
// ===========================================================================

Vector vec(const Matrix& m) {
  Vector v(m.size());
  Index k = 0;
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i) v(k++) = m(i, j);
  return v;
}

Matrix mat(const Vector& v, Index rows) {
  if (rows < 1 || v.size() % rows != 0)
    throw DimensionError("mat: vector length " + std::to_string(v.size()) +
                         " is not divisible by row count " +
                         std::to_string(rows));
  const Index cols = v.size() / rows;
  Matrix m(rows, cols);
  Index k = 0;
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = v(k++);
  return m;
}

double Array::at(const std::vector<Index>& idx) const {
  if (idx.size() != dims.size())
    throw DimensionError("Array::at: index arity mismatch");
  Index flat = 0;
  Index stride = 1;
  for (std::size_t d = 0; d < dims.size(); ++d) {
    if (idx[d] < 0 || idx[d] >= dims[d])
      throw DimensionError("Array::at: index out of range");
    flat += idx[d] * stride;
    stride *= dims[d];
  }
  return data(flat);
}

Array arr(const Vector& v, std::vector<Index> dims) {
  Index total = 1;
  for (Index d : dims) {
    if (d < 1) throw DimensionError("arr: dimensions must be >= 1");
    total *= d;
  }
  if (total != v.size())
    throw DimensionError("arr: product of dims " + std::to_string(total) +
                         " != vector length " + std::to_string(v.size()));
  return Array{std::move(dims), v};
}

Vector vec_u(const Array& t) { return t.data; }

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// ===========================================================================
// Structured permutations
// ===========================================================================

Vector Permutation::apply(const Vector& v) const {
  if (v.size() != size())
    throw DimensionError("Permutation::apply: length mismatch");
  Vector out(v.size());
  for (Index i = 0; i < size(); ++i) out(i) = v(from[i]);
  return out;
}

Matrix Permutation::dense() const {
  Matrix m = Matrix::Zero(size(), size());
  for (Index i = 0; i < size(); ++i) m(i, from[i]) = 1.0;
  return m;
}

Permutation commutation_perm(Index r1, Index r2) {
  if (r1 < 1 || r2 < 1)
    throw DimensionError("commutation_perm: dimensions must be >= 1");
  // vec(A^T)[j + r2*i] = A(i, j) = vec(A)[i + r1*j].
  Permutation p;
  p.from.resize(static_cast<std::size_t>(r1 * r2));
  for (Index i = 0; i < r1; ++i)
    for (Index j = 0; j < r2; ++j) p.from[j + r2 * i] = i + r1 * j;
  return p;
}

Matrix commutation_matrix(Index r1, Index r2) {
  return commutation_perm(r1, r2).dense();
}

Permutation pi_perm(Index p_r, Index m_r, Index p_l, Index m_l) {
  if (p_r < 1 || m_r < 1 || p_l < 1 || m_l < 1)
    throw DimensionError("pi_perm: dimensions must be >= 1");
  // Defining property: vec(b (x) a) = Pi * (vec(b) (x) vec(a)).
  // Output index w encodes entry ((j*pL + i), (c*mL + m)) of b (x) a, whose
  // value is b(j, c) * a(i, m); the matching input index pairs vec(b) entry
  // s = j + pR*c with vec(a) entry t = i + pL*m as u = t + (pL*mL)*s.
  const Index rows = p_r * p_l;
  const Index cols = m_r * m_l;
  Permutation p;
  p.from.resize(static_cast<std::size_t>(rows * cols));
  for (Index q = 0; q < cols; ++q) {
    const Index c = q / m_l;
    const Index m = q % m_l;
    for (Index r = 0; r < rows; ++r) {
      const Index j = r / p_l;
      const Index i = r % p_l;
      const Index s = j + p_r * c;
      const Index t = i + p_l * m;
      p.from[r + rows * q] = t + (p_l * m_l) * s;
    }
  }
  return p;
}

Matrix pi_matrix(Index p_r, Index m_r, Index p_l, Index m_l) {
  return pi_perm(p_r, m_r, p_l, m_l).dense();
}

// ===========================================================================
// Projections and subspace geometry
// ===========================================================================

Matrix projection(const Matrix& basis) {
  if (basis.rows() < 1 || basis.cols() < 1)
    throw DimensionError("projection: empty basis");
  // SVD-based so rank-deficient bases project onto their actual span.
  Eigen::JacobiSVD<Matrix> svd(basis, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  const double cutoff = 1e-10 * (sv.size() > 0 ? sv(0) : 0.0);
  Index rank = 0;
  for (Index i = 0; i < sv.size(); ++i)
    if (sv(i) > cutoff) ++rank;
  if (rank == 0) return Matrix::Zero(basis.rows(), basis.rows());
  const Matrix u = svd.matrixU().leftCols(rank);
  return u * u.transpose();
}

double subspace_distance(const Matrix& basis1, const Matrix& basis2) {
  if (basis1.rows() != basis2.rows())
    throw DimensionError("subspace_distance: ambient dimensions differ (" +
                         std::to_string(basis1.rows()) + " vs " +
                         std::to_string(basis2.rows()) + ")");
  return (projection(basis1) - projection(basis2)).norm();
}

// ===========================================================================
// Regularized symmetric powers
// ===========================================================================

namespace {

// Eigendecompose a symmetric PSD matrix, validating symmetry and clamping
// tiny negative eigenvalues.  Shared by the three power functions.
struct SymEig {
  Vector values;  // ascending, clamped to >= 0
  Matrix vectors;
};

SymEig sym_eig_psd(const Matrix& s, const char* what) {
  if (s.rows() != s.cols())
    throw DimensionError(std::string(what) + ": matrix is not square");
  const double scale = s.norm();
  if ((s - s.transpose()).norm() > 1e-8 * std::max(scale, 1e-300))
    throw DimensionError(std::string(what) + ": matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (s + s.transpose()));
  if (eig.info() != Eigen::Success)
    throw SingularityError(std::string(what) + ": eigendecomposition failed");
  SymEig out{eig.eigenvalues(), eig.eigenvectors()};
  const double lmax = out.values.size() ? out.values.maxCoeff() : 0.0;
  for (Index i = 0; i < out.values.size(); ++i) {
    if (out.values(i) < 0.0) {
      if (out.values(i) < -1e-8 * std::max(lmax, scale))
        throw DimensionError(std::string(what) +
                             ": matrix is not positive semidefinite");
      out.values(i) = 0.0;
    }
  }
  return out;
}

// Apply f to the spectrum under the mode's policy.  In exact mode a
// relatively tiny smallest eigenvalue is an error; in pseudo mode such
// eigenvalues are zeroed; ridge mode shifts the whole spectrum first.
template <typename F>
Matrix spectral_power(const Matrix& s, const InversionMode& mode,
                      bool inverting, const char* what, F f) {
  validate(mode);
  SymEig eig = sym_eig_psd(s, what);
  Vector lam = eig.values;
  if (mode.kind == InversionKind::ridge) lam.array() += mode.epsilon;
  const double lmax = lam.maxCoeff();
  Vector out(lam.size());
  for (Index i = 0; i < lam.size(); ++i) {
    const bool tiny_exact = inverting && lam(i) < 1e-12 * lmax;
    const bool tiny_pseudo = lam(i) < mode.rank_tol * lmax;
    switch (mode.kind) {
      case InversionKind::exact:
        if (tiny_exact)
          throw SingularityError(
              std::string(what) +
              ": matrix is singular under exact inversion; switch to "
              "pseudo or ridge mode");
        out(i) = f(lam(i));
        break;
      case InversionKind::pseudo:
        out(i) = tiny_pseudo ? 0.0 : f(lam(i));
        break;
      case InversionKind::ridge:
        out(i) = f(lam(i));  // spectrum already shifted by epsilon
        break;
    }
  }
  return eig.vectors * out.asDiagonal() * eig.vectors.transpose();
}

}  // namespace

Matrix regularized_inverse(const Matrix& s, const InversionMode& mode) {
  return spectral_power(s, mode, true, "regularized_inverse",
                        [](double x) { return 1.0 / x; });
}

Matrix regularized_sqrt(const Matrix& s, const InversionMode& mode) {
  return spectral_power(s, mode, false, "regularized_sqrt",
                        [](double x) { return std::sqrt(x); });
}

Matrix regularized_inverse_sqrt(const Matrix& s, const InversionMode& mode) {
  return spectral_power(s, mode, true, "regularized_inverse_sqrt",
                        [](double x) { return 1.0 / std::sqrt(x); });
}

// ===========================================================================
// Benchmark distance
// ===========================================================================

MeanSe benchmark_distance(Index p_l, Index p_r, Index d_l, Index d_r,
                          int reps, Rng& rng) {
  if (d_l > p_l || d_r > p_r)
    throw DimensionError("benchmark_distance: subspace exceeds ambient");
  if (reps < 1) throw DimensionError("benchmark_distance: reps must be >= 1");

  // The expectation does not depend on the fixed reference bases, so use
  // leading coordinate blocks.
  const Matrix ref =
      kron(Matrix::Identity(p_r, d_r), Matrix::Identity(p_l, d_l));
  const Matrix ref_proj = projection(ref);

  // Compensated accumulation keeps the mean independent of summation order.
  double sum = 0.0, comp = 0.0, sumsq = 0.0, compsq = 0.0;
  for (int rep = 0; rep < reps; ++rep) {
    Matrix alpha, beta, basis;
    do {  // rank-deficient draws have probability zero; guard anyway
      alpha = rng.gaussian_matrix(p_l, d_l);
      beta = rng.gaussian_matrix(p_r, d_r);
      basis = kron(beta, alpha);
      Eigen::JacobiSVD<Matrix> svd(basis);
      if (svd.singularValues()(svd.singularValues().size() - 1) >
          1e-12 * svd.singularValues()(0))
        break;
    } while (true);
    const double d = (projection(basis) - ref_proj).norm();
    double y = d - comp;
    double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
    y = d * d - compsq;
    t = sumsq + y;
    compsq = (t - sumsq) - y;
    sumsq = t;
  }
  MeanSe out;
  out.mean = sum / reps;
  if (reps > 1) {
    const double var = (sumsq - sum * sum / reps) / (reps - 1);
    out.se = std::sqrt(std::max(var, 0.0) / reps);
  }
  return out;
}

}  // namespace foldkit
