// pipeline.cpp — pre-screening, QDA, and leave-one-out cross-validation.

#include "foldkit/pipeline.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>

#include "foldkit/rng.hpp"
#include "foldkit/simbench.hpp"

namespace foldkit {

namespace {

// Deterministic sign: make the largest-magnitude entry of each column
// positive (first such entry on ties).
void fix_column_signs(Matrix& m) {
  for (Index c = 0; c < m.cols(); ++c) {
    Index lead = 0;
    double best = -1.0;
    for (Index r = 0; r < m.rows(); ++r) {
      const double a = std::abs(m(r, c));
      if (a > best) {
        best = a;
        lead = r;
      }
    }
    if (m(lead, c) < 0.0) m.col(c) = -m.col(c);
  }
}

// Top-s eigenvectors (descending eigenvalues) of a symmetric scatter
// matrix, with the deterministic sign convention.  Warns when s exceeds
// the numerical rank: the trailing directions are then an arbitrary basis
// of the (near-)null space.
Matrix top_eigvecs(const Matrix& scatter, Index s, const char* side) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(
      ((scatter + scatter.transpose()) * 0.5).eval());
  if (es.info() != Eigen::Success)
    throw SingularityError("prescreen: eigendecomposition failed");
  const Vector& lam = es.eigenvalues();  // ascending
  const double lmax = std::max(lam[lam.size() - 1], 0.0);
  Index rank = 0;
  for (Index i = 0; i < lam.size(); ++i)
    if (lam[i] > 1e-10 * lmax && lam[i] > 0.0) ++rank;
  if (s > rank)
    std::fprintf(stderr,
                 "warning: prescreen %s size %lld exceeds scatter rank %lld; "
                 "trailing directions are arbitrary\n",
                 side, static_cast<long long>(s),
                 static_cast<long long>(rank));
  Matrix top = es.eigenvectors().rightCols(s).rowwise().reverse();
  fix_column_signs(top);
  return top;
}

}  // namespace

// ===========================================================================
// Pre-screening
// ===========================================================================

std::pair<ScreenBases, SampleSet> prescreen(const SampleSet& samples,
                                            Index s_l, Index s_r) {
  samples.validate();
  const Index n = samples.n();
  const Index p_l = samples.p_l;
  const Index p_r = samples.p_r;
  if (n < 2) throw DimensionError("prescreen needs at least two samples");
  if (s_l < 1 || s_l > p_l || s_r < 1 || s_r > p_r)
    throw DimensionError("prescreen sizes must satisfy 1 <= sL <= pL, "
                         "1 <= sR <= pR");

  Matrix mean = Matrix::Zero(p_l, p_r);
  for (Index i = 0; i < n; ++i) mean += samples.x[i];
  mean /= static_cast<double>(n);
  Matrix scatter_l = Matrix::Zero(p_l, p_l);
  Matrix scatter_r = Matrix::Zero(p_r, p_r);
  for (Index i = 0; i < n; ++i) {
    const Matrix centered = samples.x[i] - mean;
    scatter_l.noalias() += centered * centered.transpose();
    scatter_r.noalias() += centered.transpose() * centered;
  }
  scatter_l /= static_cast<double>(n);
  scatter_r /= static_cast<double>(n);

  ScreenBases bases;
  bases.left = top_eigvecs(scatter_l, s_l, "left");
  bases.right = top_eigvecs(scatter_r, s_r, "right");

  SampleSet reduced;
  reduced.p_l = s_l;
  reduced.p_r = s_r;
  reduced.response = samples.response;
  reduced.y = samples.y;
  reduced.x.reserve(n);
  for (Index i = 0; i < n; ++i)
    reduced.x.push_back(apply_screen(bases, samples.x[i]));
  return {std::move(bases), std::move(reduced)};
}

Matrix apply_screen(const ScreenBases& bases, const Matrix& x) {
  if (x.rows() != bases.left.rows() || x.cols() != bases.right.rows())
    throw DimensionError("apply_screen: predictor shape does not match bases");
  return bases.left.transpose() * x * bases.right;
}

// ===========================================================================
// Quadratic discriminant analysis
// ===========================================================================

namespace {

// Inverse and log-determinant of a symmetric PSD covariance under one
// inversion mode.  Exact rejects a (near-)singular spectrum; pseudo drops
// eigenvalues below rank_tol * lambda_max and returns the pseudo-
// determinant of the retained ones; ridge shifts the whole spectrum.
std::pair<Matrix, double> spectral_inv_logdet(const Matrix& cov,
                                              const InversionMode& mode) {
  validate(mode);
  Eigen::SelfAdjointEigenSolver<Matrix> es(
      ((cov + cov.transpose()) * 0.5).eval());
  if (es.info() != Eigen::Success)
    throw SingularityError("qda_fit: eigendecomposition failed");
  Vector lam = es.eigenvalues();
  const Matrix& v = es.eigenvectors();
  if (mode.kind == InversionKind::ridge) lam.array() += mode.epsilon;
  const double lmax = lam.maxCoeff();

  Vector inv_lam = Vector::Zero(lam.size());
  double log_det = 0.0;
  if (mode.kind == InversionKind::pseudo) {
    const double cutoff = mode.rank_tol * std::max(lmax, 0.0);
    for (Index i = 0; i < lam.size(); ++i) {
      if (lam[i] > cutoff && lam[i] > 0.0) {
        inv_lam[i] = 1.0 / lam[i];
        log_det += std::log(lam[i]);
      }
    }
  } else {
    if (!(lmax > 0.0) || lam.minCoeff() < 1e-12 * lmax)
      throw SingularityError(
          "class covariance is singular in exact mode; switch to pseudo "
          "or ridge mode");
    for (Index i = 0; i < lam.size(); ++i) {
      inv_lam[i] = 1.0 / lam[i];
      log_det += std::log(lam[i]);
    }
  }
  Matrix inv = v * inv_lam.asDiagonal() * v.transpose();
  return {((inv + inv.transpose()) * 0.5).eval(), log_det};
}

}  // namespace

QdaModel qda_fit(const SampleSet& samples, const InversionMode& mode) {
  samples.validate();
  validate(mode);
  if (samples.response != ResponseKind::categorical)
    throw DimensionError("qda_fit needs a categorical response");
  const Index n = samples.n();
  const Index d = samples.ambient();

  std::map<double, std::vector<Index>> classes;
  for (Index i = 0; i < n; ++i) classes[samples.y[i]].push_back(i);
  if (classes.size() < 2)
    throw DimensionError("qda_fit needs at least two classes");

  QdaModel model;
  model.mode = mode;
  model.dim = d;
  for (const auto& [label, members] : classes) {
    const auto n_c = static_cast<double>(members.size());
    Vector mu = Vector::Zero(d);
    for (Index i : members) mu += vec(samples.x[i]);
    mu /= n_c;
    Matrix cov = Matrix::Zero(d, d);
    for (Index i : members) {
      const Vector r = vec(samples.x[i]) - mu;
      cov.noalias() += r * r.transpose();
    }
    cov /= n_c;
    auto [inv, log_det] = spectral_inv_logdet(cov, mode);
    model.labels.push_back(label);
    model.log_prior.push_back(std::log(n_c / static_cast<double>(n)));
    model.mean.push_back(std::move(mu));
    model.cov_inv.push_back(std::move(inv));
    model.log_det.push_back(log_det);
  }
  return model;
}

double qda_predict(const QdaModel& model, const Vector& x) {
  if (x.size() != model.dim)
    throw DimensionError("qda_predict: feature length does not match model");
  double best_score = 0.0;
  double best_label = 0.0;
  bool have_best = false;
  // Labels are stored ascending, so strict improvement keeps the smallest
  // label on ties.
  for (std::size_t c = 0; c < model.labels.size(); ++c) {
    const Vector r = x - model.mean[c];
    const double score = model.log_prior[c] - 0.5 * model.log_det[c] -
                         0.5 * r.dot(model.cov_inv[c] * r);
    if (!have_best || score > best_score) {
      best_score = score;
      best_label = model.labels[c];
      have_best = true;
    }
  }
  return best_label;
}

// ===========================================================================
// Leave-one-out cross-validation
// ===========================================================================

namespace {

// Content hash of one item (response plus predictor bits), so fold seeds
// follow the item rather than its position in the file.
std::uint64_t item_hash(const SampleSet& samples, Index i) {
  std::uint64_t h = mix64(std::bit_cast<std::uint64_t>(samples.y[i]));
  const Matrix& x = samples.x[i];
  for (Index c = 0; c < x.cols(); ++c)
    for (Index r = 0; r < x.rows(); ++r)
      h = mix64(h ^ std::bit_cast<std::uint64_t>(x(r, c)));
  return h;
}

SampleSet drop_item(const SampleSet& samples, Index drop) {
  SampleSet out;
  out.p_l = samples.p_l;
  out.p_r = samples.p_r;
  out.response = samples.response;
  const Index n = samples.n();
  out.x.reserve(n - 1);
  out.y.reserve(n - 1);
  for (Index i = 0; i < n; ++i) {
    if (i == drop) continue;
    out.x.push_back(samples.x[i]);
    out.y.push_back(samples.y[i]);
  }
  return out;
}

long count_trace_violations(const std::vector<double>& trace) {
  long v = 0;
  for (std::size_t k = 1; k < trace.size(); ++k) {
    const double allowed = 1e-12 * std::max(1.0, std::abs(trace[k - 1]));
    if (trace[k] > trace[k - 1] + allowed) ++v;
  }
  return v;
}

// Wrap per-item feature vectors as a sample set qda_fit can consume.
SampleSet feature_set(std::vector<Matrix> feats, std::vector<double> y) {
  SampleSet out;
  out.p_l = feats.front().rows();
  out.p_r = feats.front().cols();
  out.response = ResponseKind::categorical;
  out.x = std::move(feats);
  out.y = std::move(y);
  return out;
}

}  // namespace

LoocvResult loocv_classify(const SampleSet& samples, ClassifyMethod method,
                           int s, Index s_l, Index s_r,
                           const FoldingConfig& config) {
  samples.validate();
  if (samples.response != ResponseKind::categorical)
    throw DimensionError("loocv_classify needs a categorical response");
  const Index n = samples.n();
  if (n < 3) throw DimensionError("loocv_classify needs at least 3 samples");
  config.validate(s_l, s_r);

  LoocvResult result;
  result.predictions.resize(n);
  for (Index i = 0; i < n; ++i) {
    try {
      const SampleSet train = drop_item(samples, i);
      auto [bases, reduced] = prescreen(train, s_l, s_r);
      const Matrix x_test = apply_screen(bases, samples.x[i]);

      std::vector<Matrix> train_feats;
      train_feats.reserve(reduced.x.size());
      Vector test_feat;
      if (method.folded) {
        FoldingConfig cfg = config;
        cfg.seed = derive_seed(config.seed, {0x10ccULL, item_hash(samples, i)});
        const FoldingFit fit = fit_folded(reduced, method.base, s, cfg);
        result.trace_violations += count_trace_violations(fit.objective_trace);
        for (const Matrix& xr : reduced.x)
          train_feats.push_back(fit.a.transpose() * xr * fit.b);
        test_feat = vec(fit.a.transpose() * x_test * fit.b);
      } else {
        // Vectorize-first baseline on the screened predictors, with the
        // matching target dimension (the SIR candidate matrix has rank
        // at most s-1).
        Index d = config.m_l * config.m_r;
        if (method.base == TargetMethod::sir)
          d = std::min<Index>(d, s - 1);
        d = std::min<Index>(d, s_l * s_r);
        const Matrix basis =
            conventional_fit(reduced, method.base, s, d, config.inversion);
        for (const Matrix& xr : reduced.x)
          train_feats.push_back(basis.transpose() * vec(xr));
        test_feat = basis.transpose() * vec(x_test);
      }

      const QdaModel model = qda_fit(
          feature_set(std::move(train_feats), train.y), config.inversion);
      result.predictions[i] = qda_predict(model, test_feat);
      if (result.predictions[i] == samples.y[i]) ++result.correct;
    } catch (const SingularityError& e) {
      throw SingularityError(std::string(e.what()) + " (fold " +
                             std::to_string(i) + ")");
    } catch (const DimensionError& e) {
      throw DimensionError(std::string(e.what()) + " (fold " +
                           std::to_string(i) + ")");
    }
  }
  return result;
}

}  // namespace foldkit
