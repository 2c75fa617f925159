// pipeline.hpp — pre-screening, QDA, and leave-one-out cross-validation.
//
// The applied classification workflow for matrix predictors: reduce each
// X to X* = Vᵀ X W with V/W the top eigenvectors of the pooled row/column
// scatter matrices, estimate a folded (or vectorized) basis on the training
// items, project everything into that coordinate system, and classify with
// Gaussian quadratic discriminant analysis.  LOOCV refits the entire chain
// (screening included) on every training fold so the held-out item never
// influences its own prediction.

#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "foldkit/envelope.hpp"
#include "foldkit/moments.hpp"
#include "foldkit/tensor_ops.hpp"

namespace foldkit {

// ===========================================================================
// Pre-screening
// ===========================================================================

// Top eigenvectors of the pooled scatter matrices; columns orthonormal,
// eigenvalue order non-increasing, signs fixed deterministically (largest
// magnitude component positive, ties to the first index).
struct ScreenBases {
  Matrix left;   // pL x sL, from E_n (X - mean)(X - mean)ᵀ
  Matrix right;  // pR x sR, from E_n (X - mean)ᵀ(X - mean)
};

// Compute screen bases on samples and return them together with the
// reduced sample set (X* = leftᵀ X right, same responses).  Requesting
// more directions than the scatter rank is allowed (the trailing
// eigenvectors are an arbitrary-but-deterministic basis of the null
// space); a warning is emitted on stderr.
std::pair<ScreenBases, SampleSet> prescreen(const SampleSet& samples,
                                            Index s_l, Index s_r);

// Reduce one matrix predictor through previously fitted bases.
Matrix apply_screen(const ScreenBases& bases, const Matrix& x);

// ===========================================================================
// Quadratic discriminant analysis
// ===========================================================================

// Per-class Gaussian model on vectorized features.  Covariance inverses and
// log-determinants are computed under the requested inversion mode: exact
// rejects singular class covariances, pseudo uses the pseudo-inverse and
// pseudo-determinant on the retained spectrum, ridge shifts every
// eigenvalue by epsilon.
struct QdaModel {
  std::vector<double> labels;     // ascending
  std::vector<double> log_prior;  // log(n_c / n)
  std::vector<Vector> mean;
  std::vector<Matrix> cov_inv;
  std::vector<double> log_det;
  InversionMode mode;
  Index dim = 0;
};

// Fit on a categorical sample set whose rows are already the feature
// vectors to classify on.
QdaModel qda_fit(const SampleSet& samples, const InversionMode& mode);

// argmax_c [ log prior_c − ½ log det Σ_c − ½ (x−μ_c)ᵀ Σ_c⁻¹ (x−μ_c) ];
// ties resolve to the smallest class label.
double qda_predict(const QdaModel& model, const Vector& x);

// ===========================================================================
// Leave-one-out cross-validation
// ===========================================================================

// What to fit inside each training fold: a folded basis (features
// aᵀ X* b) or a vectorize-first baseline of the same moment family
// (features basisᵀ vec(X*)).
struct ClassifyMethod {
  TargetMethod base = TargetMethod::dr;
  bool folded = true;
};

struct LoocvResult {
  long correct = 0;
  std::vector<double> predictions;  // aligned with input sample order
  long trace_violations = 0;        // objective increases across all folds
};

// For each item i: drop it, pre-screen the remaining items, fit the
// requested basis with s response slices, train QDA on the projected
// training features, and predict the held-out item through the same
// bases.  Fold seeds derive from (config.seed, content hash of item i),
// so the tally is invariant to sample order.  Errors propagate tagged
// with the fold index.
LoocvResult loocv_classify(const SampleSet& samples, ClassifyMethod method,
                           int s, Index s_l, Index s_r,
                           const FoldingConfig& config);

}  // namespace foldkit
