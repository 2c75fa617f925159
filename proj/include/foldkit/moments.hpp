// moments.hpp — slice-conditional moment targets.
//
// Converts a sample of matrix-valued predictors with responses into the
// inverse-regression moment targets consumed by the envelope solver:
//   SIR  — standardized within-slice mean vectors,
//   SAVE — identity minus within-slice covariance of standardized data,
//   DR   — slice-pair second-moment contrasts.
// All three are stored premultiplied by the covariance square root used as
// the objective weight, so a single uniform weighting matrix serves every
// method.  Optional robust weights downweight high-leverage observations.

#pragma once

#include <optional>
#include <vector>

#include "foldkit/tensor_ops.hpp"

namespace foldkit {

// ===========================================================================
// Samples and slices
// ===========================================================================

enum class ResponseKind { continuous, categorical };

struct SampleSet {
  Index p_l = 0;               // predictor rows
  Index p_r = 0;               // predictor columns
  std::vector<Matrix> x;       // n predictors, each p_l x p_r
  std::vector<double> y;       // responses (labels when categorical)
  ResponseKind response = ResponseKind::categorical;

  Index n() const { return static_cast<Index>(x.size()); }
  Index ambient() const { return p_l * p_r; }

  void validate() const;  // shape/finiteness contracts; throws DimensionError
};

struct SliceAssignment {
  int s = 0;                        // number of slices
  std::vector<int> label;           // per item, in 1..s
  std::vector<Index> counts;        // per slice
  std::vector<double> proportions;  // counts / n
};

// Partition the responses into s slices.  Categorical responses map labels
// to slices bijectively (s must equal the number of distinct labels);
// continuous responses split into equal-count slices by order statistics,
// ties broken by stable sample order.
SliceAssignment slice_assign(const SampleSet& samples, int s);

// ===========================================================================
// Robust weights
// ===========================================================================

struct RobustWeights {
  Vector w;                      // per item, nonnegative, sums to 1
  double cutoff_quantile = 1.0;  // parameter it was built with
};

// Huber-style weights w_i proportional to min(1, c / d_i), where d_i is the
// Mahalanobis quadratic form of vec(X_i) and c its empirical quantile at
// cutoff_quantile (in (0, 1]; 1 keeps every weight at the uniform value).
RobustWeights robust_weights(const SampleSet& samples, double cutoff_quantile,
                             const InversionMode& mode = InversionMode::Exact());

// ===========================================================================
// Moment targets
// ===========================================================================

enum class TargetMethod { sir, save, dr };

std::string to_string(TargetMethod method);

// The fitted material the envelope solver consumes.
//   targets[w] — ambient x k target matrix (k = 1 for SIR, k = ambient for
//                SAVE/DR), already premultiplied by cov_root's inverse
//                pairing (see module note).
//   weights[w] — slice proportions (SIR/SAVE) or slice-pair products (DR).
//   cov        — the covariance actually used under `mode` (ridge mode
//                stores the shifted matrix), with its inverse and roots.
struct MomentTargets {
  TargetMethod method = TargetMethod::sir;
  Index p_l = 0;
  Index p_r = 0;
  Matrix cov;
  Matrix cov_root;
  Matrix cov_inv_root;
  Matrix cov_inv;
  std::vector<Matrix> targets;
  std::vector<double> weights;
  InversionMode mode;

  Index ambient() const { return p_l * p_r; }
  Index coef_cols() const {  // columns of each coefficient block f(w)
    return method == TargetMethod::sir ? 1 : ambient();
  }
};

// Grand-mean-centered sample covariance of vec(X) with the n denominator;
// with weights, the weighted mean and weighted outer products.
Matrix sample_cov(const SampleSet& samples,
                  const RobustWeights* weights = nullptr);

MomentTargets sir_targets(const SampleSet& samples,
                          const SliceAssignment& slices,
                          const InversionMode& mode,
                          const RobustWeights* weights = nullptr);

MomentTargets save_targets(const SampleSet& samples,
                           const SliceAssignment& slices,
                           const InversionMode& mode,
                           const RobustWeights* weights = nullptr);

MomentTargets dr_targets(const SampleSet& samples,
                         const SliceAssignment& slices,
                         const InversionMode& mode,
                         const RobustWeights* weights = nullptr);

MomentTargets make_targets(const SampleSet& samples,
                           const SliceAssignment& slices, TargetMethod method,
                           const InversionMode& mode,
                           const RobustWeights* weights = nullptr);

}  // namespace foldkit
