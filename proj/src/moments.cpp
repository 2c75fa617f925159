// moments.cpp — slice statistics and inverse-regression moment targets.

#include "foldkit/moments.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace foldkit {

// ===========================================================================
// SampleSet
// ===========================================================================

void SampleSet::validate() const {
  if (p_l < 1 || p_r < 1) throw DimensionError("SampleSet: empty predictors");
  if (n() < 2) throw DimensionError("SampleSet: need at least 2 items");
  if (y.size() != x.size())
    throw DimensionError("SampleSet: responses and predictors differ in count");
  for (Index i = 0; i < n(); ++i) {
    if (x[i].rows() != p_l || x[i].cols() != p_r)
      throw DimensionError("SampleSet: item " + std::to_string(i) +
                           " has inconsistent shape");
    if (!x[i].allFinite() || !std::isfinite(y[i]))
      throw DimensionError("SampleSet: item " + std::to_string(i) +
                           " contains non-finite values");
  }
}

// ===========================================================================
// Slicing
// ===========================================================================

SliceAssignment slice_assign(const SampleSet& samples, int s) {
  samples.validate();
  if (s < 2) throw DimensionError("slice_assign: need at least 2 slices");
  const Index n = samples.n();

  SliceAssignment out;
  out.s = s;
  out.label.assign(static_cast<std::size_t>(n), 0);

  if (samples.response == ResponseKind::categorical) {
    // Labels map to slices bijectively, ordered by label value.
    std::map<double, int> slot;
    for (double v : samples.y) slot.emplace(v, 0);
    if (static_cast<int>(slot.size()) != s)
      throw DimensionError(
          "slice_assign: categorical response has " +
          std::to_string(slot.size()) + " distinct labels but s=" +
          std::to_string(s) + " slices were requested");
    int next = 1;
    for (auto& kv : slot) kv.second = next++;
    for (Index i = 0; i < n; ++i) out.label[i] = slot[samples.y[i]];
  } else {
    if (n < s) throw DimensionError("slice_assign: fewer items than slices");
    Index distinct = 1;
    {
      std::vector<double> sorted(samples.y);
      std::sort(sorted.begin(), sorted.end());
      for (Index i = 1; i < n; ++i)
        if (sorted[i] != sorted[i - 1]) ++distinct;
    }
    if (distinct < s)
      throw DimensionError(
          "slice_assign: degenerate slicing — only " +
          std::to_string(distinct) + " distinct response values for s=" +
          std::to_string(s) + " slices");
    // Equal-count split by order statistics; stable sort breaks ties by
    // original sample order.
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
      return samples.y[a] < samples.y[b];
    });
    for (int l = 0; l < s; ++l) {
      const Index lo = (n * l) / s;
      const Index hi = (n * (l + 1)) / s;
      for (Index k = lo; k < hi; ++k) out.label[order[k]] = l + 1;
    }
  }

  out.counts.assign(static_cast<std::size_t>(s), 0);
  for (int l : out.label) ++out.counts[static_cast<std::size_t>(l - 1)];
  for (Index c : out.counts)
    if (c == 0) throw DimensionError("slice_assign: empty slice");
  out.proportions.resize(static_cast<std::size_t>(s));
  for (int l = 0; l < s; ++l)
    out.proportions[l] = static_cast<double>(out.counts[l]) /
                         static_cast<double>(n);
  return out;
}

// ===========================================================================
// Internal: vectorized data and weighted slice statistics
// ===========================================================================

namespace {

// vec(X_i) as columns of an ambient x n matrix.
Matrix vec_columns(const SampleSet& samples) {
  Matrix v(samples.ambient(), samples.n());
  for (Index i = 0; i < samples.n(); ++i) v.col(i) = vec(samples.x[i]);
  return v;
}

Vector effective_weights(const SampleSet& samples,
                         const RobustWeights* weights) {
  const Index n = samples.n();
  if (weights == nullptr)
    return Vector::Constant(n, 1.0 / static_cast<double>(n));
  if (weights->w.size() != n)
    throw DimensionError("weights: size does not match sample count");
  return weights->w;
}

// Grand-mean-centered slice means and second moments under the weights.
struct SliceStats {
  Vector grand_mean;
  std::vector<double> prop;      // weighted slice mass
  std::vector<Vector> mean;      // E_w[v - mu | slice]
  std::vector<Matrix> second;    // E_w[(v - mu)(v - mu)^T | slice]
};

SliceStats slice_stats(const Matrix& v, const SliceAssignment& slices,
                       const Vector& w, bool with_second) {
  const Index dim = v.rows();
  const Index n = v.cols();
  const int s = slices.s;

  SliceStats st;
  st.grand_mean = v * w;  // weights sum to 1
  st.prop.assign(static_cast<std::size_t>(s), 0.0);
  st.mean.assign(static_cast<std::size_t>(s), Vector::Zero(dim));
  if (with_second)
    st.second.assign(static_cast<std::size_t>(s), Matrix::Zero(dim, dim));

  for (Index i = 0; i < n; ++i)
    st.prop[static_cast<std::size_t>(slices.label[i] - 1)] += w(i);

  for (Index i = 0; i < n; ++i) {
    const std::size_t l = static_cast<std::size_t>(slices.label[i] - 1);
    const Vector c = v.col(i) - st.grand_mean;
    st.mean[l] += w(i) * c;
    if (with_second) st.second[l] += w(i) * (c * c.transpose());
  }
  for (int l = 0; l < s; ++l) {
    if (st.prop[l] <= 0.0)
      throw DimensionError("slice " + std::to_string(l + 1) +
                           " has zero total weight");
    st.mean[l] /= st.prop[l];
    if (with_second) st.second[l] /= st.prop[l];
  }
  return st;
}

// Covariance powers shared by every target builder.  The stored cov is
// root*root so the solver's normal equations stay consistent with the
// premultiplier in truncated (pseudo) and shifted (ridge) modes alike.
void fill_cov_powers(MomentTargets& t, const Matrix& sigma,
                     const InversionMode& mode) {
  t.cov_root = regularized_sqrt(sigma, mode);
  t.cov_inv_root = regularized_inverse_sqrt(sigma, mode);
  t.cov_inv = regularized_inverse(sigma, mode);
  t.cov = t.cov_root * t.cov_root;
  t.cov = 0.5 * (t.cov + t.cov.transpose());
}

void require_slice_pairs(const SliceAssignment& slices, const char* what) {
  for (std::size_t l = 0; l < slices.counts.size(); ++l)
    if (slices.counts[l] < 2)
      throw DimensionError(std::string(what) + ": slice " +
                           std::to_string(l + 1) +
                           " has fewer than 2 members");
}

}  // namespace

// ===========================================================================
// Covariance and robust weights
// ===========================================================================

Matrix sample_cov(const SampleSet& samples, const RobustWeights* weights) {
  samples.validate();
  const Matrix v = vec_columns(samples);
  const Vector w = effective_weights(samples, weights);
  const Vector mu = v * w;
  const Matrix c = v.colwise() - mu;
  Matrix sigma = c * w.asDiagonal() * c.transpose();
  return 0.5 * (sigma + sigma.transpose());
}

RobustWeights robust_weights(const SampleSet& samples, double cutoff_quantile,
                             const InversionMode& mode) {
  samples.validate();
  if (!(cutoff_quantile > 0.0) || cutoff_quantile > 1.0)
    throw DimensionError("robust_weights: cutoff_quantile must be in (0, 1]");
  const Index n = samples.n();
  const Matrix v = vec_columns(samples);
  const Vector mu = v.rowwise().mean();
  const Matrix inv = regularized_inverse(sample_cov(samples), mode);

  Vector d(n);
  for (Index i = 0; i < n; ++i) {
    const Vector c = v.col(i) - mu;
    d(i) = c.dot(inv * c);
  }

  RobustWeights out;
  out.cutoff_quantile = cutoff_quantile;
  if (d.maxCoeff() <= 0.0) {
    out.w = Vector::Constant(n, 1.0 / static_cast<double>(n));
    return out;
  }
  // Empirical quantile by order statistic (cutoff 1 picks the maximum, so
  // no observation is downweighted).
  std::vector<double> sorted(d.data(), d.data() + n);
  std::sort(sorted.begin(), sorted.end());
  const Index pos = std::min<Index>(
      n - 1, std::max<Index>(0, static_cast<Index>(
                                    std::ceil(cutoff_quantile * n)) - 1));
  const double c = sorted[static_cast<std::size_t>(pos)];

  out.w = Vector(n);
  for (Index i = 0; i < n; ++i)
    out.w(i) = d(i) <= 0.0 ? 1.0 : std::min(1.0, c / d(i));
  out.w /= out.w.sum();
  return out;
}

// ===========================================================================
// Targets
// ===========================================================================

std::string to_string(TargetMethod method) {
  switch (method) {
    case TargetMethod::sir:
      return "sir";
    case TargetMethod::save:
      return "save";
    case TargetMethod::dr:
      return "dr";
  }
  return "unknown";
}

MomentTargets sir_targets(const SampleSet& samples,
                          const SliceAssignment& slices,
                          const InversionMode& mode,
                          const RobustWeights* weights) {
  samples.validate();
  MomentTargets t;
  t.method = TargetMethod::sir;
  t.p_l = samples.p_l;
  t.p_r = samples.p_r;
  t.mode = mode;
  const Matrix v = vec_columns(samples);
  fill_cov_powers(t, sample_cov(samples, weights), mode);
  const SliceStats st =
      slice_stats(v, slices, effective_weights(samples, weights), false);
  for (int l = 0; l < slices.s; ++l) {
    t.targets.push_back(t.cov_inv_root * st.mean[l]);
    t.weights.push_back(st.prop[l]);
  }
  return t;
}

MomentTargets save_targets(const SampleSet& samples,
                           const SliceAssignment& slices,
                           const InversionMode& mode,
                           const RobustWeights* weights) {
  samples.validate();
  require_slice_pairs(slices, "save_targets");
  MomentTargets t;
  t.method = TargetMethod::save;
  t.p_l = samples.p_l;
  t.p_r = samples.p_r;
  t.mode = mode;
  const Matrix v = vec_columns(samples);
  fill_cov_powers(t, sample_cov(samples, weights), mode);
  const SliceStats st =
      slice_stats(v, slices, effective_weights(samples, weights), true);
  const Matrix eye = Matrix::Identity(t.ambient(), t.ambient());
  for (int l = 0; l < slices.s; ++l) {
    // Within-slice covariance of standardized predictors.
    const Matrix within =
        st.second[l] - st.mean[l] * st.mean[l].transpose();
    const Matrix var_z = t.cov_inv_root * within * t.cov_inv_root;
    Matrix m = eye - var_z;
    m = 0.5 * (m + m.transpose());
    t.targets.push_back(m);
    t.weights.push_back(st.prop[l]);
  }
  return t;
}

MomentTargets dr_targets(const SampleSet& samples,
                         const SliceAssignment& slices,
                         const InversionMode& mode,
                         const RobustWeights* weights) {
  samples.validate();
  require_slice_pairs(slices, "dr_targets");
  MomentTargets t;
  t.method = TargetMethod::dr;
  t.p_l = samples.p_l;
  t.p_r = samples.p_r;
  t.mode = mode;
  const Matrix v = vec_columns(samples);
  fill_cov_powers(t, sample_cov(samples, weights), mode);
  const SliceStats st =
      slice_stats(v, slices, effective_weights(samples, weights), true);
  // All ordered slice pairs.  For an independent copy (V, V~) of the
  // centered data, E(Delta Delta^T | k, l) with Delta = V~ - V expands into
  // the four-term combination below.
  for (int k = 0; k < slices.s; ++k) {
    for (int l = 0; l < slices.s; ++l) {
      const Matrix e_dd = st.second[k] + st.second[l] -
                          st.mean[k] * st.mean[l].transpose() -
                          st.mean[l] * st.mean[k].transpose();
      Matrix m = t.cov_inv_root * (2.0 * t.cov - e_dd) * t.cov_inv_root;
      m = 0.5 * (m + m.transpose());
      t.targets.push_back(m);
      t.weights.push_back(st.prop[k] * st.prop[l]);
    }
  }
  return t;
}

MomentTargets make_targets(const SampleSet& samples,
                           const SliceAssignment& slices, TargetMethod method,
                           const InversionMode& mode,
                           const RobustWeights* weights) {
  switch (method) {
    case TargetMethod::sir:
      return sir_targets(samples, slices, mode, weights);
    case TargetMethod::save:
      return save_targets(samples, slices, mode, weights);
    case TargetMethod::dr:
      return dr_targets(samples, slices, mode, weights);
  }
  throw DimensionError("make_targets: unknown method");
}

}  // namespace foldkit
