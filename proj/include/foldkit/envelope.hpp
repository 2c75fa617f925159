// envelope.hpp — alternating least squares for Kronecker-structured spans.
//
// Given moment targets T(w) with weights lambda_w and the weighting matrix
// A (the covariance square root stored in the targets), minimize
//
//     J(a, b, f) = sum_w lambda_w * || T(w) - A (b (x) a) f(w) ||_F^2
//
// over a (p_l x m_l), b (p_r x m_r) and per-slice coefficients f(w).  Each
// block update is an exact least-squares solve, so the objective never
// increases; the minimizing span(b (x) a) estimates the smallest
// Kronecker-product subspace containing the targets' span.
//
// The normal equations are assembled blockwise from Kronecker factors —
// the big rearrangement permutation is never materialized — which keeps
// the solver usable at prescreened-EEG scale.
//
// The inversion mode stored in the targets governs every linear solve here;
// fit_folded propagates its config's mode into the targets it builds.

#pragma once

#include <cstdint>
#include <vector>

#include "foldkit/moments.hpp"
#include "foldkit/rng.hpp"

namespace foldkit {

// ===========================================================================
// Configuration and fit result
// ===========================================================================

struct FoldingConfig {
  Index m_l = 1;                 // left folded dimension (1 <= m_l <= p_l)
  Index m_r = 1;                 // right folded dimension (1 <= m_r <= p_r)
  int max_iters = 500;
  double rel_tol = 1e-9;         // relative objective-decrease stop rule
  int restarts = 5;              // random restarts; best final objective wins
  InversionMode inversion{};
  std::uint64_t seed = 0;
  bool normalize_bases = true;   // orthonormalize a, b after convergence

  void validate(Index p_l, Index p_r) const;
};

struct FoldingFit {
  Matrix a;                      // p_l x m_l
  Matrix b;                      // p_r x m_r
  std::vector<Matrix> f;         // per slice/pair: (m_r*m_l) x k coefficients
  std::vector<double> objective_trace;  // winning restart, one entry per sweep
  bool converged = false;
  int restart_index = 0;
};

// ===========================================================================
// Objective and the three exact block updates
// ===========================================================================

double objective(const MomentTargets& targets, const Matrix& a,
                 const Matrix& b, const std::vector<Matrix>& f);

// Minimizer over b with (a, f) fixed.
Matrix update_b(const MomentTargets& targets, const Matrix& a,
                const std::vector<Matrix>& f);

// Minimizer over a with (b, f) fixed.
Matrix update_a(const MomentTargets& targets, const Matrix& b,
                const std::vector<Matrix>& f);

// Minimizer over all f(w) with (a, b) fixed.
std::vector<Matrix> update_f(const MomentTargets& targets, const Matrix& a,
                             const Matrix& b);

// ===========================================================================
// Driver
// ===========================================================================

// Multi-restart alternating minimization: per restart draw a and f with
// standard-normal entries, sweep update_b -> update_a -> update_f until the
// relative objective decrease falls below rel_tol, and keep the restart
// with the smallest final objective (ties to the lowest restart index).
FoldingFit fold(const MomentTargets& targets, const FoldingConfig& config);

// Slice, build the requested targets under config.inversion, and fold.
FoldingFit fit_folded(const SampleSet& samples, TargetMethod method, int s,
                      const FoldingConfig& config);

}  // namespace foldkit
