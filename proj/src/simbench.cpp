// simbench.cpp — synthetic mixture models and the Monte-Carlo harness.

#include "foldkit/simbench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <utility>

#include "foldkit/io.hpp"

namespace foldkit {

namespace {

// Compensated accumulator for long Monte-Carlo sums.
struct Kahan {
  double sum = 0.0;
  double carry = 0.0;
  void add(double v) {
    const double y = v - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
};

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

}  // namespace

// ===========================================================================
// Mixture models
// ===========================================================================

void MixtureModelSpec::validate() const {
  if (p < 2) throw DimensionError("mixture model needs p >= 2");
  if (!(pi > 0.0 && pi < 1.0))
    throw DimensionError("mixture weight pi must lie in (0, 1)");
  if (!(sigma2 > 0.0) || !(tau2 > 0.0))
    throw DimensionError("mixture variances must be positive");
}

std::tuple<SampleSet, Matrix, Matrix> gen_mixture(const MixtureModelSpec& spec,
                                                  Index n, Rng& rng) {
  spec.validate();
  if (n < 2) throw DimensionError("gen_mixture needs n >= 2");
  const Index p = spec.p;

  // Low-variance coordinate set A (row, col pairs).
  std::set<std::pair<Index, Index>> active;
  if (spec.variant == MixtureVariant::example1) {
    active = {{0, 1}, {1, 0}};
  } else {
    active = {{0, 0}, {0, 1}, {1, 0}};
  }

  // Per-class entrywise mean and standard deviation.
  Matrix mean0 = Matrix::Zero(p, p);
  Matrix mean1 = Matrix::Zero(p, p);
  mean1(0, 0) = spec.mu;
  mean1(1, 1) = spec.mu;
  Matrix sd0 = Matrix::Ones(p, p);
  Matrix sd1 = Matrix::Ones(p, p);
  for (const auto& [r, c] : active) {
    sd0(r, c) = std::sqrt(spec.sigma2);
    sd1(r, c) = std::sqrt(spec.tau2);
  }

  SampleSet samples;
  samples.p_l = p;
  samples.p_r = p;
  samples.response = ResponseKind::categorical;
  samples.x.reserve(n);
  samples.y.reserve(n);
  for (Index i = 0; i < n; ++i) {
    const int label = rng.uniform() < spec.pi ? 1 : 0;
    const Matrix& mean = label == 1 ? mean1 : mean0;
    const Matrix& sd = label == 1 ? sd1 : sd0;
    Matrix x(p, p);
    // Column-stacked entries, drawn in vec (storage) order.
    for (Index c = 0; c < p; ++c)
      for (Index r = 0; r < p; ++r)
        x(r, c) = mean(r, c) + sd(r, c) * rng.gaussian();
    samples.x.push_back(std::move(x));
    samples.y.push_back(static_cast<double>(label));
  }
  samples.validate();

  Matrix basis = Matrix::Identity(p, 2);
  return {std::move(samples), basis, basis};
}

// ===========================================================================
// Conventional (vectorize-first) baselines
// ===========================================================================

Matrix conventional_fit(const SampleSet& samples, TargetMethod method, int s,
                        Index d, const InversionMode& mode) {
  samples.validate();
  const Index ambient = samples.ambient();
  if (d < 1 || d > ambient)
    throw DimensionError("conventional_fit: d must lie in [1, pL*pR]");

  const SliceAssignment slices = slice_assign(samples, s);
  const MomentTargets t = make_targets(samples, slices, method, mode);

  // Candidate matrix in standardized scale.  SIR targets are vectors
  // (outer products); SAVE/DR targets are symmetric matrices (squares).
  Matrix kernel = Matrix::Zero(ambient, ambient);
  for (std::size_t w = 0; w < t.targets.size(); ++w) {
    const Matrix& tw = t.targets[w];
    if (method == TargetMethod::sir)
      kernel.noalias() += t.weights[w] * (tw * tw.transpose());
    else
      kernel.noalias() += t.weights[w] * (tw * tw);
  }
  kernel = ((kernel + kernel.transpose()) * 0.5).eval();

  Eigen::SelfAdjointEigenSolver<Matrix> es(kernel);
  if (es.info() != Eigen::Success)
    throw SingularityError("conventional_fit: eigendecomposition failed");

  // Top-d eigenvectors, descending, mapped back to the original scale.
  Matrix top = es.eigenvectors().rightCols(d).rowwise().reverse();
  Matrix dirs = t.cov_inv_root * top;
  fix_column_signs(dirs);
  return dirs;
}

// ===========================================================================
// Monte-Carlo harness
// ===========================================================================

namespace {

struct CellAcc {
  Kahan sum;
  Kahan sumsq;
  long count = 0;
  int failures = 0;

  void add(double v) {
    sum.add(v);
    sumsq.add(v * v);
    ++count;
  }
  double mean() const { return count > 0 ? sum.sum / count : 0.0; }
  double se() const {
    if (count < 2) return 0.0;
    const double m = mean();
    const double var =
        std::max(0.0, (sumsq.sum - count * m * m) / (count - 1));
    return std::sqrt(var / count);
  }
};

long count_trace_violations(const std::vector<double>& trace) {
  long v = 0;
  for (std::size_t k = 1; k < trace.size(); ++k) {
    const double allowed = 1e-12 * std::max(1.0, std::abs(trace[k - 1]));
    if (trace[k] > trace[k - 1] + allowed) ++v;
  }
  return v;
}

}  // namespace

BenchReport monte_carlo(int table, const std::vector<Index>& n_list,
                        const std::vector<Index>& p_list, int N,
                        const FoldingConfig& config, Rng& rng, double mu) {
  if (table != 1 && table != 2)
    throw DimensionError("monte_carlo: table must be 1 or 2");
  if (N < 1) throw DimensionError("monte_carlo: need at least one rep");
  const auto t0 = std::chrono::steady_clock::now();

  BenchReport report;
  report.table = table;
  report.reps = N;
  report.mu = mu;
  const std::uint64_t base = rng.integer();
  report.seed = base;

  // Chance level for a random span of matching dimensions, per ambient p.
  for (Index p : p_list) {
    Rng brng(derive_seed(base, {0xbe2cULL, static_cast<std::uint64_t>(p)}));
    report.benchmarks.emplace_back(
        p, benchmark_distance(p, p, 2, 2, 10000, brng));
  }

  const MixtureVariant variant =
      table == 1 ? MixtureVariant::example1 : MixtureVariant::example2;
  const std::vector<TargetMethod> methods = {
      TargetMethod::sir, TargetMethod::save, TargetMethod::dr};
  const std::vector<std::string> folded_names = {"folded-sir", "folded-save",
                                                 "folded-dr"};
  const std::vector<std::string> conv_names = {"sir", "save", "dr"};
  const bool with_conventional = table == 2;

  for (Index p : p_list) {
    MixtureModelSpec spec;
    spec.variant = variant;
    spec.p = p;
    spec.mu = mu;
    const Index ambient = p * p;
    const Matrix truth =
        kron(Matrix::Identity(p, 2), Matrix::Identity(p, 2));

    for (Index n : n_list) {
      // The sample covariance is rank-deficient once n <= pL*pR, so exact
      // inversion cannot work there; fall back to the pseudo-inverse.
      InversionMode cell_mode = config.inversion;
      if (cell_mode.kind == InversionKind::exact && n <= ambient)
        cell_mode = InversionMode::Pseudo();

      std::vector<CellAcc> folded_acc(methods.size());
      std::vector<CellAcc> conv_acc(methods.size());

      for (int rep = 0; rep < N; ++rep) {
        Rng drng(derive_seed(
            base, {0xda7aULL, static_cast<std::uint64_t>(table),
                   static_cast<std::uint64_t>(p),
                   static_cast<std::uint64_t>(n),
                   static_cast<std::uint64_t>(rep)}));
        auto [samples, left, right] = gen_mixture(spec, n, drng);

        for (std::size_t mi = 0; mi < methods.size(); ++mi) {
          FoldingConfig cfg = config;
          cfg.m_l = 2;
          cfg.m_r = 2;
          cfg.inversion = cell_mode;
          cfg.seed = derive_seed(
              base, {0x5eedULL, static_cast<std::uint64_t>(table),
                     static_cast<std::uint64_t>(p),
                     static_cast<std::uint64_t>(n),
                     static_cast<std::uint64_t>(rep),
                     static_cast<std::uint64_t>(mi)});
          try {
            const FoldingFit fit = fit_folded(samples, methods[mi], 2, cfg);
            report.trace_violations +=
                count_trace_violations(fit.objective_trace);
            folded_acc[mi].add(
                subspace_distance(kron(fit.b, fit.a), truth));
          } catch (const SingularityError&) {
            ++folded_acc[mi].failures;
          }
        }

        if (with_conventional) {
          for (std::size_t mi = 0; mi < methods.size(); ++mi) {
            const Index d = methods[mi] == TargetMethod::sir ? 1 : 4;
            try {
              const Matrix basis =
                  conventional_fit(samples, methods[mi], 2, d, cell_mode);
              conv_acc[mi].add(subspace_distance(basis, truth));
            } catch (const SingularityError&) {
              ++conv_acc[mi].failures;
            }
          }
        }
      }

      auto emit = [&](const std::string& name, const CellAcc& acc) {
        CellStat cell;
        cell.method = name;
        cell.p = p;
        cell.n = n;
        cell.mean = acc.mean();
        cell.se = acc.se();
        cell.failures = acc.failures;
        cell.inversion = to_string(cell_mode);
        report.cells.push_back(std::move(cell));
      };
      for (std::size_t mi = 0; mi < methods.size(); ++mi)
        emit(folded_names[mi], folded_acc[mi]);
      if (with_conventional)
        for (std::size_t mi = 0; mi < methods.size(); ++mi)
          emit(conv_names[mi], conv_acc[mi]);
    }
  }

  report.runtime_sec = std::chrono::duration<double>(
                           std::chrono::steady_clock::now() - t0)
                           .count();
  return report;
}

// ===========================================================================
// Report serialization
// ===========================================================================

namespace {

const CellStat* find_cell(const BenchReport& report, const std::string& method,
                          Index p, Index n) {
  for (const CellStat& c : report.cells)
    if (c.method == method && c.p == p && c.n == n) return &c;
  return nullptr;
}

}  // namespace

std::string bench_csv(const BenchReport& report,
                      const std::vector<Index>& n_list) {
  // Preserve first-appearance order of (p, method) rows.
  std::vector<std::pair<Index, std::string>> rows;
  for (const CellStat& c : report.cells) {
    const auto key = std::make_pair(c.p, c.method);
    if (std::find(rows.begin(), rows.end(), key) == rows.end())
      rows.push_back(key);
  }

  std::ostringstream out;
  out << "method,p";
  for (Index n : n_list) out << ",n" << n;
  out << "\n";
  for (const auto& [p, method] : rows) {
    out << method << "," << p;
    for (Index n : n_list) {
      const CellStat* c = find_cell(report, method, p, n);
      out << ",";
      if (c != nullptr) out << fmt17(c->mean);
    }
    out << "\n";
  }
  return out.str();
}

std::string bench_json(const BenchReport& report,
                       const std::vector<Index>& n_list) {
  std::ostringstream out;
  out << "{\n";
  out << "  \"table\": " << report.table << ",\n";
  out << "  \"reps\": " << report.reps << ",\n";
  out << "  \"seed\": " << report.seed << ",\n";
  out << "  \"mu\": " << fmt17(report.mu) << ",\n";
  out << "  \"n_list\": [";
  for (std::size_t i = 0; i < n_list.size(); ++i)
    out << (i ? ", " : "") << n_list[i];
  out << "],\n";
  out << "  \"benchmarks\": [";
  for (std::size_t i = 0; i < report.benchmarks.size(); ++i) {
    const auto& [p, stat] = report.benchmarks[i];
    out << (i ? ", " : "") << "{\"p\": " << p
        << ", \"mean\": " << fmt17(stat.mean)
        << ", \"se\": " << fmt17(stat.se) << "}";
  }
  out << "],\n";
  out << "  \"cells\": [\n";
  for (std::size_t i = 0; i < report.cells.size(); ++i) {
    const CellStat& c = report.cells[i];
    out << "    {\"method\": " << json_quote(c.method) << ", \"p\": " << c.p
        << ", \"n\": " << c.n << ", \"mean\": " << fmt17(c.mean)
        << ", \"se\": " << fmt17(c.se) << ", \"failures\": " << c.failures
        << ", \"inversion\": " << json_quote(c.inversion) << "}"
        << (i + 1 < report.cells.size() ? "," : "") << "\n";
  }
  out << "  ],\n";
  out << "  \"trace_violations\": " << report.trace_violations << ",\n";
  out << "  \"runtime_sec\": " << fmt17(report.runtime_sec) << "\n";
  out << "}\n";
  return out.str();
}

}  // namespace foldkit
