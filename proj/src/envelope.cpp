// envelope.cpp — blockwise alternating least squares.
//
// Index conventions used throughout (all zero-based, vec stacks columns):
//   * rows of vec(b (x) a) factor as j*p_l + i   (j right-row, i left-row);
//   * vec(b) entry (j, c) sits at j + p_r*c; vec(a) entry (i, m) at i + p_l*m;
//   * rows of f(w) factor as c*m_l + m           (c right-col, m left-col).

#include "foldkit/envelope.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace foldkit {

namespace {

// ===========================================================================
// Shared solve for normal equations
// ===========================================================================

// Solve G x = rhs for symmetric PSD G under the mode's policy.  Pseudo and
// ridge modes fall back to a rank-tolerant solve: the normal system is
// always consistent (rhs lies in range(G)), so clipping tiny eigenvalues
// still returns an exact minimizer of the underlying least squares.
Matrix solve_normal(const Matrix& gram, const Matrix& rhs,
                    const InversionMode& mode, const char* what) {
  const Matrix g = 0.5 * (gram + gram.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(g);
  if (eig.info() != Eigen::Success)
    throw SingularityError(std::string(what) +
                           ": eigendecomposition of the normal matrix failed");
  const Vector& lam = eig.eigenvalues();
  const double lmax = std::max(lam.maxCoeff(), 0.0);
  if (mode.kind == InversionKind::exact) {
    if (lmax <= 0.0 || lam.minCoeff() < 1e-12 * lmax)
      throw SingularityError(
          std::string(what) +
          ": normal matrix is singular under exact inversion; switch to "
          "pseudo mode");
  }
  const double cutoff =
      (mode.kind == InversionKind::exact ? 0.0 : mode.rank_tol) * lmax;
  Vector inv(lam.size());
  for (Index i = 0; i < lam.size(); ++i)
    inv(i) = lam(i) > cutoff && lam(i) > 0.0 ? 1.0 / lam(i) : 0.0;
  return eig.eigenvectors() *
         (inv.asDiagonal() * (eig.eigenvectors().transpose() * rhs));
}

// ===========================================================================
// Workspace: dimensions and premultiplied targets
// ===========================================================================

struct Workspace {
  const MomentTargets& t;
  Index p_l, p_r, m_l, m_r, k;
  std::vector<Matrix> t_tilde;  // A * T(w), fixed across sweeps

  Workspace(const MomentTargets& targets, Index ml, Index mr)
      : t(targets), p_l(targets.p_l), p_r(targets.p_r), m_l(ml), m_r(mr),
        k(targets.coef_cols()) {
    if (m_l < 1 || m_l > p_l || m_r < 1 || m_r > p_r)
      throw DimensionError("fold: folded dimensions out of range");
    if (targets.targets.size() != targets.weights.size() ||
        targets.targets.empty())
      throw DimensionError("fold: malformed targets");
    t_tilde.reserve(targets.targets.size());
    for (const Matrix& tw : targets.targets) {
      if (tw.rows() != targets.ambient() || tw.cols() != k)
        throw DimensionError("fold: target has wrong shape");
      t_tilde.push_back(targets.cov_root * tw);
    }
  }

  std::size_t slices() const { return t.targets.size(); }
};

void check_a(const Workspace& ws, const Matrix& a) {
  if (a.rows() != ws.p_l || a.cols() != ws.m_l)
    throw DimensionError("fold: left basis has wrong shape");
}
void check_b(const Workspace& ws, const Matrix& b) {
  if (b.rows() != ws.p_r || b.cols() != ws.m_r)
    throw DimensionError("fold: right basis has wrong shape");
}
void check_f(const Workspace& ws, const std::vector<Matrix>& f) {
  if (f.size() != ws.slices())
    throw DimensionError("fold: coefficient count does not match targets");
  for (const Matrix& fw : f)
    if (fw.rows() != ws.m_r * ws.m_l || fw.cols() != ws.k)
      throw DimensionError("fold: coefficient block has wrong shape");
}

// Sum of weighted coefficient Grams: Phi = sum_w lambda_w f(w) f(w)^T,
// indexed by the (c*m_l + m) row convention of f.
Matrix coef_gram(const Workspace& ws, const std::vector<Matrix>& f) {
  const Index d = ws.m_r * ws.m_l;
  Matrix phi = Matrix::Zero(d, d);
  for (std::size_t w = 0; w < ws.slices(); ++w)
    phi += ws.t.weights[w] * (f[w] * f[w].transpose());
  return phi;
}

// S(c,d) = sum_{j,j'} b(j,c) b(j',d) * Sigma[(j,:),(j',:)] — the covariance
// contracted on its right-factor rows, one p_l x p_l block per (c, d).
std::vector<Matrix> contract_cov_right(const Workspace& ws, const Matrix& b) {
  std::vector<Matrix> s(static_cast<std::size_t>(ws.m_r * ws.m_r));
  for (Index c = 0; c < ws.m_r; ++c)
    for (Index d = 0; d < ws.m_r; ++d) {
      Matrix acc = Matrix::Zero(ws.p_l, ws.p_l);
      for (Index j = 0; j < ws.p_r; ++j)
        for (Index jp = 0; jp < ws.p_r; ++jp) {
          const double scale = b(j, c) * b(jp, d);
          if (scale != 0.0)
            acc += scale *
                   ws.t.cov.block(j * ws.p_l, jp * ws.p_l, ws.p_l, ws.p_l);
        }
      s[static_cast<std::size_t>(c * ws.m_r + d)] = std::move(acc);
    }
  return s;
}

// ===========================================================================
// Block updates
// ===========================================================================

Matrix step_b(const Workspace& ws, const Matrix& a,
              const std::vector<Matrix>& f) {
  check_a(ws, a);
  check_f(ws, f);
  const Index p_l = ws.p_l, p_r = ws.p_r, m_l = ws.m_l, m_r = ws.m_r;

  // C(j,j') = a^T Sigma[(j,:),(j',:)] a — covariance contracted on the left
  // factor, stored as an (p_r*m_l) x (p_r*m_l) grid of m_l x m_l blocks.
  Matrix c2(p_r * m_l, p_r * m_l);
  for (Index j = 0; j < p_r; ++j)
    for (Index jp = 0; jp < p_r; ++jp)
      c2.block(j * m_l, jp * m_l, m_l, m_l) =
          a.transpose() * ws.t.cov.block(j * p_l, jp * p_l, p_l, p_l) * a;

  const Matrix phi = coef_gram(ws, f);

  // Gram over vec(b): rows/cols indexed c*p_r + j (= vec(b) entry j + p_r*c).
  Matrix gram(p_r * m_r, p_r * m_r);
  for (Index c = 0; c < m_r; ++c)
    for (Index d = 0; d < m_r; ++d)
      for (Index j = 0; j < p_r; ++j)
        for (Index jp = 0; jp < p_r; ++jp)
          gram(c * p_r + j, d * p_r + jp) =
              c2.block(j * m_l, jp * m_l, m_l, m_l)
                  .cwiseProduct(
                      phi.block(d * m_l, c * m_l, m_l, m_l).transpose())
                  .sum();

  // Right-hand side: sum_w lambda_w <f(w) rows (c,:), a^T T~(w) rows (j,:)>.
  Matrix lin = Matrix::Zero(m_r, p_r);
  for (std::size_t w = 0; w < ws.slices(); ++w) {
    const double lw = ws.t.weights[w];
    for (Index j = 0; j < p_r; ++j) {
      const Matrix dj =
          a.transpose() * ws.t_tilde[w].block(j * p_l, 0, p_l, ws.k);
      for (Index c = 0; c < m_r; ++c)
        lin(c, j) += lw * f[w].block(c * m_l, 0, m_l, ws.k)
                              .cwiseProduct(dj)
                              .sum();
    }
  }
  Vector rhs(p_r * m_r);
  for (Index c = 0; c < m_r; ++c)
    for (Index j = 0; j < p_r; ++j) rhs(c * p_r + j) = lin(c, j);

  const Vector x = solve_normal(gram, rhs, ws.t.mode, "update_b");
  Matrix b(p_r, m_r);
  for (Index c = 0; c < m_r; ++c)
    for (Index j = 0; j < p_r; ++j) b(j, c) = x(c * p_r + j);
  return b;
}

Matrix step_a(const Workspace& ws, const Matrix& b,
              const std::vector<Matrix>& f) {
  check_b(ws, b);
  check_f(ws, f);
  const Index p_l = ws.p_l, p_r = ws.p_r, m_l = ws.m_l, m_r = ws.m_r;

  const std::vector<Matrix> s = contract_cov_right(ws, b);
  const Matrix phi = coef_gram(ws, f);

  // Gram over vec(a): rows/cols indexed m*p_l + i (= vec(a) entry i + p_l*m).
  Matrix gram = Matrix::Zero(p_l * m_l, p_l * m_l);
  for (Index c = 0; c < m_r; ++c)
    for (Index d = 0; d < m_r; ++d) {
      const Matrix& scd = s[static_cast<std::size_t>(c * m_r + d)];
      for (Index m = 0; m < m_l; ++m)
        for (Index nn = 0; nn < m_l; ++nn)
          gram.block(m * p_l, nn * p_l, p_l, p_l) +=
              phi(c * m_l + m, d * m_l + nn) * scd;
    }

  // Right-hand side via E(c) = sum_j b(j,c) T~(w) rows (j,:).
  Matrix lin = Matrix::Zero(p_l, m_l);
  for (std::size_t w = 0; w < ws.slices(); ++w) {
    const double lw = ws.t.weights[w];
    for (Index c = 0; c < m_r; ++c) {
      Matrix ec = Matrix::Zero(p_l, ws.k);
      for (Index j = 0; j < p_r; ++j)
        if (b(j, c) != 0.0)
          ec += b(j, c) * ws.t_tilde[w].block(j * p_l, 0, p_l, ws.k);
      lin += lw * ec * f[w].block(c * m_l, 0, m_l, ws.k).transpose();
    }
  }
  Vector rhs(p_l * m_l);
  for (Index m = 0; m < m_l; ++m)
    for (Index i = 0; i < p_l; ++i) rhs(m * p_l + i) = lin(i, m);

  const Vector x = solve_normal(gram, rhs, ws.t.mode, "update_a");
  Matrix a(p_l, m_l);
  for (Index m = 0; m < m_l; ++m)
    for (Index i = 0; i < p_l; ++i) a(i, m) = x(m * p_l + i);
  return a;
}

std::vector<Matrix> step_f(const Workspace& ws, const Matrix& a,
                           const Matrix& b) {
  check_a(ws, a);
  check_b(ws, b);
  const Index p_l = ws.p_l, p_r = ws.p_r, m_l = ws.m_l, m_r = ws.m_r;

  // Gram = (b (x) a)^T Sigma (b (x) a), assembled blockwise; rows follow
  // the (c*m_l + m) convention of f.
  const std::vector<Matrix> s = contract_cov_right(ws, b);
  Matrix gram(m_r * m_l, m_r * m_l);
  for (Index c = 0; c < m_r; ++c)
    for (Index d = 0; d < m_r; ++d)
      gram.block(c * m_l, d * m_l, m_l, m_l) =
          a.transpose() * s[static_cast<std::size_t>(c * m_r + d)] * a;

  // One factorization serves every slice: the per-slice weights scale both
  // sides of the normal equations and cancel.
  std::vector<Matrix> f;
  f.reserve(ws.slices());
  for (std::size_t w = 0; w < ws.slices(); ++w) {
    Matrix rhs(m_r * m_l, ws.k);
    for (Index c = 0; c < m_r; ++c) {
      Matrix ec = Matrix::Zero(p_l, ws.k);
      for (Index j = 0; j < p_r; ++j)
        if (b(j, c) != 0.0)
          ec += b(j, c) * ws.t_tilde[w].block(j * p_l, 0, p_l, ws.k);
      rhs.block(c * m_l, 0, m_l, ws.k) = a.transpose() * ec;
    }
    f.push_back(solve_normal(gram, rhs, ws.t.mode, "update_f"));
  }
  return f;
}

double eval_objective(const Workspace& ws, const Matrix& a, const Matrix& b,
                      const std::vector<Matrix>& f) {
  check_a(ws, a);
  check_b(ws, b);
  check_f(ws, f);
  const Matrix design = ws.t.cov_root * kron(b, a);
  double j = 0.0;
  for (std::size_t w = 0; w < ws.slices(); ++w)
    j += ws.t.weights[w] *
         (ws.t.targets[w] - design * f[w]).squaredNorm();
  return j;
}

// Infer (m_l, m_r) for the public single-update entry points.
std::pair<Index, Index> infer_dims(const MomentTargets& t, Index m_l,
                                   const std::vector<Matrix>& f) {
  if (f.empty()) throw DimensionError("update: empty coefficient list");
  if (m_l < 1 || f[0].rows() % m_l != 0)
    throw DimensionError("update: coefficient rows incompatible with m_l");
  return {m_l, f[0].rows() / m_l};
}

}  // namespace

// ===========================================================================
// Public surface
// ===========================================================================

void FoldingConfig::validate(Index p_l, Index p_r) const {
  if (m_l < 1 || m_l > p_l || m_r < 1 || m_r > p_r)
    throw DimensionError("FoldingConfig: need 1 <= m_l <= p_l, 1 <= m_r <= p_r");
  if (max_iters < 1) throw DimensionError("FoldingConfig: max_iters >= 1");
  if (restarts < 1) throw DimensionError("FoldingConfig: restarts >= 1");
  if (!(rel_tol > 0.0)) throw DimensionError("FoldingConfig: rel_tol > 0");
  foldkit::validate(inversion);
}

double objective(const MomentTargets& targets, const Matrix& a,
                 const Matrix& b, const std::vector<Matrix>& f) {
  Workspace ws(targets, a.cols(), b.cols());
  return eval_objective(ws, a, b, f);
}

Matrix update_b(const MomentTargets& targets, const Matrix& a,
                const std::vector<Matrix>& f) {
  const auto [m_l, m_r] = infer_dims(targets, a.cols(), f);
  Workspace ws(targets, m_l, m_r);
  return step_b(ws, a, f);
}

Matrix update_a(const MomentTargets& targets, const Matrix& b,
                const std::vector<Matrix>& f) {
  if (f.empty()) throw DimensionError("update_a: empty coefficient list");
  if (b.cols() < 1 || f[0].rows() % b.cols() != 0)
    throw DimensionError("update_a: coefficient rows incompatible with m_r");
  Workspace ws(targets, f[0].rows() / b.cols(), b.cols());
  return step_a(ws, b, f);
}

std::vector<Matrix> update_f(const MomentTargets& targets, const Matrix& a,
                             const Matrix& b) {
  Workspace ws(targets, a.cols(), b.cols());
  return step_f(ws, a, b);
}

FoldingFit fold(const MomentTargets& targets, const FoldingConfig& config) {
  config.validate(targets.p_l, targets.p_r);
  Workspace ws(targets, config.m_l, config.m_r);
  const Index coef_rows = config.m_r * config.m_l;

  FoldingFit best;
  double best_final = std::numeric_limits<double>::infinity();
  bool have_best = false;

  for (int restart = 0; restart < config.restarts; ++restart) {
    Rng rng(derive_seed(config.seed, {0xf01dull, static_cast<std::uint64_t>(
                                                     restart)}));
    Matrix a = rng.gaussian_matrix(ws.p_l, ws.m_l);
    std::vector<Matrix> f;
    f.reserve(ws.slices());
    for (std::size_t w = 0; w < ws.slices(); ++w)
      f.push_back(rng.gaussian_matrix(coef_rows, ws.k));

    Matrix b;
    std::vector<double> trace;
    bool converged = false;
    double j_prev = std::numeric_limits<double>::infinity();
    try {
      for (int iter = 0; iter < config.max_iters; ++iter) {
        b = step_b(ws, a, f);
        a = step_a(ws, b, f);
        f = step_f(ws, a, b);
        const double j = eval_objective(ws, a, b, f);
        trace.push_back(j);
        if (std::isfinite(j_prev) &&
            (j_prev - j) <= config.rel_tol * std::max(j_prev, 1e-300)) {
          converged = true;
          break;
        }
        j_prev = j;
      }
    } catch (const SingularityError& err) {
      throw SingularityError(std::string(err.what()) + " (restart " +
                             std::to_string(restart) + ", iteration " +
                             std::to_string(trace.size()) + ")");
    }

    const double final_j = trace.empty()
                               ? std::numeric_limits<double>::infinity()
                               : trace.back();
    if (!have_best || final_j < best_final) {
      have_best = true;
      best_final = final_j;
      best.a = a;
      best.b = b;
      best.f = std::move(f);
      best.objective_trace = std::move(trace);
      best.converged = converged;
      best.restart_index = restart;
    }
  }

  if (config.normalize_bases) {
    // Re-express with orthonormal a, b; (R_b (x) R_a) f keeps the fitted
    // matrices A (b (x) a) f(w) bit-identical in exact arithmetic.
    Eigen::HouseholderQR<Matrix> qra(best.a);
    Eigen::HouseholderQR<Matrix> qrb(best.b);
    const Matrix qa =
        qra.householderQ() * Matrix::Identity(ws.p_l, ws.m_l);
    const Matrix qb =
        qrb.householderQ() * Matrix::Identity(ws.p_r, ws.m_r);
    const Matrix ra = qra.matrixQR()
                          .topLeftCorner(ws.m_l, ws.m_l)
                          .triangularView<Eigen::Upper>();
    const Matrix rb = qrb.matrixQR()
                          .topLeftCorner(ws.m_r, ws.m_r)
                          .triangularView<Eigen::Upper>();
    const Matrix mix = kron(rb, ra);
    for (Matrix& fw : best.f) fw = mix * fw;
    best.a = qa;
    best.b = qb;
  }
  return best;
}

FoldingFit fit_folded(const SampleSet& samples, TargetMethod method, int s,
                      const FoldingConfig& config) {
  config.validate(samples.p_l, samples.p_r);
  const SliceAssignment slices = slice_assign(samples, s);
  const MomentTargets targets =
      make_targets(samples, slices, method, config.inversion);
  return fold(targets, config);
}

}  // namespace foldkit
