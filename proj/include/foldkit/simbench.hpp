// simbench.hpp — synthetic models, conventional baselines, benchmark harness.
//
// Two binary-mixture matrix-predictor models with known two-dimensional
// left/right structure; conventional (vectorize-first) SIR/SAVE/DR
// baselines; and the Monte-Carlo harness that scores folded and
// conventional estimators by projection distance to the true span.

#pragma once

#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

#include "foldkit/envelope.hpp"
#include "foldkit/moments.hpp"
#include "foldkit/rng.hpp"
#include "foldkit/tensor_ops.hpp"

namespace foldkit {

// ===========================================================================
// Mixture models
// ===========================================================================

enum class MixtureVariant { example1, example2 };

// Y ~ Bernoulli(pi); X | Y has independent normal entries.  Both classes
// share unit variance except on a small coordinate set A where the variance
// is sigma2 (class 0) or tau2 (class 1); class 1 additionally gets mean mu
// on the two leading diagonal entries.  The two variants differ only in A.
// The central folding structure is span{e1, e2} on both sides.
struct MixtureModelSpec {
  MixtureVariant variant = MixtureVariant::example1;
  Index p = 5;
  double pi = 0.5;
  double mu = 3.0;      // class-1 mean offset; calibrated default
  double sigma2 = 0.1;
  double tau2 = 1.5;

  void validate() const;
};

// Draw n observations plus the true left/right bases (p x 2 each).
std::tuple<SampleSet, Matrix, Matrix> gen_mixture(const MixtureModelSpec& spec,
                                                  Index n, Rng& rng);

// ===========================================================================
// Conventional (vectorize-first) baselines
// ===========================================================================

// Fit SIR/SAVE/DR on vec(X) directly: top-d eigenvectors of the method's
// candidate matrix in standardized scale, back-transformed by the inverse
// covariance square root.  Returns an ambient x d basis.
Matrix conventional_fit(const SampleSet& samples, TargetMethod method, int s,
                        Index d, const InversionMode& mode);

// ===========================================================================
// Monte-Carlo harness
// ===========================================================================

struct CellStat {
  std::string method;  // "folded-sir", ..., "sir", "save", "dr"
  Index p = 0;
  Index n = 0;
  double mean = 0.0;
  double se = 0.0;
  int failures = 0;            // replications lost to singularities
  std::string inversion;       // mode actually used for the cell
};

struct BenchReport {
  int table = 1;
  int reps = 0;
  std::uint64_t seed = 0;
  double mu = 0.0;
  std::vector<CellStat> cells;
  std::vector<std::pair<Index, MeanSe>> benchmarks;  // per ambient p
  long trace_violations = 0;  // objective-trace increases observed anywhere
  double runtime_sec = 0.0;
};

// Replicate generate -> fit -> distance for every (p, n, method) cell.
// Table 1 scores the three folded methods on the first model; table 2 runs
// folded and conventional methods on the second model against the same
// true span.  Cells with n <= ambient dimension switch exact inversion to
// pseudo (the sample covariance cannot be full rank there).
BenchReport monte_carlo(int table, const std::vector<Index>& n_list,
                        const std::vector<Index>& p_list, int N,
                        const FoldingConfig& config, Rng& rng,
                        double mu = 3.0);

// Fixed-layout CSV (rows = method per p, columns = n) and a JSON sidecar
// carrying standard errors, seeds, and runtime.
std::string bench_csv(const BenchReport& report,
                      const std::vector<Index>& n_list);
std::string bench_json(const BenchReport& report,
                       const std::vector<Index>& n_list);

}  // namespace foldkit
