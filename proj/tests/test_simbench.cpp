// test_simbench.cpp — mixture generator, conventional baselines, and the
// Monte-Carlo harness.
//
// Generator moments are checked against the model's population values at
// large n, the vectorize-first baselines against the planted span, and the
// replication harness for determinism, sane distance ranges, and the
// superiority of the structured fits it exists to demonstrate.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "foldkit/simbench.hpp"
#include "foldkit/tensor_ops.hpp"

using namespace foldkit;

namespace {

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

// Mean and variance of entry (r, c) over the items with the given label.
std::pair<double, double> entry_stats(const SampleSet& s, double label,
                                      Index r, Index c) {
  double sum = 0.0;
  Index cnt = 0;
  for (Index i = 0; i < s.n(); ++i) {
    if (s.y[static_cast<std::size_t>(i)] != label) continue;
    sum += s.x[static_cast<std::size_t>(i)](r, c);
    ++cnt;
  }
  const double mean = sum / static_cast<double>(cnt);
  double ss = 0.0;
  for (Index i = 0; i < s.n(); ++i) {
    if (s.y[static_cast<std::size_t>(i)] != label) continue;
    const double d = s.x[static_cast<std::size_t>(i)](r, c) - mean;
    ss += d * d;
  }
  return {mean, ss / static_cast<double>(cnt - 1)};
}

Index count_label(const SampleSet& s, double label) {
  Index cnt = 0;
  for (double v : s.y)
    if (v == label) ++cnt;
  return cnt;
}

}  // namespace

// ===========================================================================
// Mixture generator
// ===========================================================================

TEST_CASE("generator hits the population moments of the first variant") {
  MixtureModelSpec spec;  // variant 1, p = 5, pi = 0.5, mu = 3
  Rng rng(41);
  auto [s, left, right] = gen_mixture(spec, 10000, rng);
  REQUIRE(s.n() == 10000);
  REQUIRE(s.p_l == 5);
  REQUIRE(s.response == ResponseKind::categorical);
  CHECK(max_abs(left - Matrix::Identity(5, 2)) == 0.0);
  CHECK(max_abs(right - Matrix::Identity(5, 2)) == 0.0);

  // Class share: binomial 3-sigma band around pi.
  const double share = static_cast<double>(count_label(s, 1.0)) / 10000.0;
  CHECK(std::abs(share - 0.5) < 3.0 * std::sqrt(0.25 / 10000.0));

  // Class-1 means sit on the two leading diagonal entries only.
  auto [m00, v00] = entry_stats(s, 1.0, 0, 0);
  auto [m11, v11] = entry_stats(s, 1.0, 1, 1);
  auto [m01, v01] = entry_stats(s, 1.0, 0, 1);
  CHECK(m00 == doctest::Approx(3.0).epsilon(0.03));
  CHECK(m11 == doctest::Approx(3.0).epsilon(0.03));
  CHECK(std::abs(m01) < 0.08);

  // Variance pattern: shrunk/inflated on the off-diagonal pair (0,1),(1,0),
  // unit elsewhere - including under the class-1 mean shift.
  auto [m01z, v01z] = entry_stats(s, 0.0, 0, 1);
  auto [m10z, v10z] = entry_stats(s, 0.0, 1, 0);
  CHECK(v01z == doctest::Approx(0.1).epsilon(0.05));
  CHECK(v10z == doctest::Approx(0.1).epsilon(0.05));
  CHECK(v01 == doctest::Approx(1.5).epsilon(0.08));
  CHECK(v00 == doctest::Approx(1.0).epsilon(0.08));
  auto [m33, v33] = entry_stats(s, 0.0, 3, 3);
  CHECK(std::abs(m33) < 0.06);
  CHECK(v33 == doctest::Approx(1.0).epsilon(0.08));
}

TEST_CASE("the second variant moves the variance set onto the corner") {
  MixtureModelSpec spec;
  spec.variant = MixtureVariant::example2;
  spec.pi = 0.3;
  Rng rng(42);
  auto [s, left, right] = gen_mixture(spec, 10000, rng);

  const double share = static_cast<double>(count_label(s, 1.0)) / 10000.0;
  CHECK(std::abs(share - 0.3) < 3.0 * std::sqrt(0.21 / 10000.0));

  // (0,0) now carries both the mean shift and the variance contrast.
  auto [m00z, v00z] = entry_stats(s, 0.0, 0, 0);
  auto [m00o, v00o] = entry_stats(s, 1.0, 0, 0);
  CHECK(v00z == doctest::Approx(0.1).epsilon(0.06));
  CHECK(v00o == doctest::Approx(1.5).epsilon(0.1));
  CHECK(m00o == doctest::Approx(3.0).epsilon(0.03));
  // (1,1) keeps the mean but not the variance contrast.
  auto [m11o, v11o] = entry_stats(s, 1.0, 1, 1);
  CHECK(m11o == doctest::Approx(3.0).epsilon(0.03));
  CHECK(v11o == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("generator validates its specification") {
  MixtureModelSpec spec;
  Rng rng(43);
  spec.p = 1;  // the mean pattern needs at least 2 rows and columns
  CHECK_THROWS_AS(gen_mixture(spec, 100, rng), DimensionError);
  spec = MixtureModelSpec{};
  spec.pi = 1.0;
  CHECK_THROWS_AS(gen_mixture(spec, 100, rng), DimensionError);
  spec = MixtureModelSpec{};
  spec.sigma2 = 0.0;
  CHECK_THROWS_AS(gen_mixture(spec, 100, rng), DimensionError);
  spec = MixtureModelSpec{};
  CHECK_THROWS_AS(gen_mixture(spec, 1, rng), DimensionError);
}

TEST_CASE("draws are reproducible for a fixed generator state") {
  MixtureModelSpec spec;
  Rng r1(44), r2(44);
  auto [s1, l1, rr1] = gen_mixture(spec, 50, r1);
  auto [s2, l2, rr2] = gen_mixture(spec, 50, r2);
  REQUIRE(s1.n() == s2.n());
  for (Index i = 0; i < 50; ++i) {
    CHECK(s1.y[static_cast<std::size_t>(i)] ==
          s2.y[static_cast<std::size_t>(i)]);
    CHECK(max_abs(s1.x[static_cast<std::size_t>(i)] -
                  s2.x[static_cast<std::size_t>(i)]) == 0.0);
  }
}

// ===========================================================================
// Conventional baselines
// ===========================================================================

TEST_CASE("vectorized baseline recovers population directions at large n") {
  MixtureModelSpec spec;
  Rng rng(45);
  auto [s, left, right] = gen_mixture(spec, 100000, rng);
  const Matrix p_truth = projection(kron(right, left));

  const Matrix dir = conventional_fit(s, TargetMethod::sir, 2, 1,
                                      InversionMode::Exact());
  REQUIRE(dir.cols() == 1);
  CHECK((dir - p_truth * dir).norm() / dir.norm() < 0.05);

  const Matrix dirs = conventional_fit(s, TargetMethod::save, 2, 3,
                                       InversionMode::Exact());
  for (Index c = 0; c < 3; ++c) {
    const Vector u = dirs.col(c);
    CHECK((u - p_truth * u).norm() / u.norm() < 0.1);
  }
}

TEST_CASE("baseline output is deterministic with a fixed sign convention") {
  MixtureModelSpec spec;
  Rng rng(46);
  auto [s, left, right] = gen_mixture(spec, 400, rng);
  const Matrix d1 = conventional_fit(s, TargetMethod::dr, 2, 4,
                                     InversionMode::Exact());
  const Matrix d2 = conventional_fit(s, TargetMethod::dr, 2, 4,
                                     InversionMode::Exact());
  CHECK(max_abs(d1 - d2) == 0.0);
  // Sign rule: the largest-magnitude entry of every column is positive.
  for (Index c = 0; c < d1.cols(); ++c) {
    Index at = 0;
    d1.col(c).cwiseAbs().maxCoeff(&at);
    CHECK(d1(at, c) > 0.0);
  }
  CHECK_THROWS_AS(
      conventional_fit(s, TargetMethod::dr, 2, 0, InversionMode::Exact()),
      DimensionError);
  CHECK_THROWS_AS(
      conventional_fit(s, TargetMethod::dr, 2, 26, InversionMode::Exact()),
      DimensionError);
}

// ===========================================================================
// Monte-Carlo harness
// ===========================================================================

TEST_CASE("replication harness is deterministic in the driving seed") {
  FoldingConfig cfg;
  cfg.m_l = 2;
  cfg.m_r = 2;
  cfg.restarts = 3;

  Rng r1(47), r2(47);
  const BenchReport b1 = monte_carlo(2, {100}, {5}, 4, cfg, r1);
  const BenchReport b2 = monte_carlo(2, {100}, {5}, 4, cfg, r2);
  REQUIRE(b1.cells.size() == b2.cells.size());
  CHECK(b1.seed == b2.seed);
  for (std::size_t i = 0; i < b1.cells.size(); ++i) {
    CHECK(b1.cells[i].method == b2.cells[i].method);
    CHECK(b1.cells[i].mean == b2.cells[i].mean);
    CHECK(b1.cells[i].se == b2.cells[i].se);
    CHECK(b1.cells[i].failures == b2.cells[i].failures);
  }
  CHECK(b1.trace_violations == b2.trace_violations);

  // A different stream gives a different (but still finite) answer.
  Rng r3(48);
  const BenchReport b3 = monte_carlo(2, {100}, {5}, 4, cfg, r3);
  bool any_diff = false;
  for (std::size_t i = 0; i < b1.cells.size(); ++i)
    if (b1.cells[i].mean != b3.cells[i].mean) any_diff = true;
  CHECK(any_diff);
}

TEST_CASE("distances, errors, and modes reported per cell are sensible") {
  FoldingConfig cfg;
  cfg.m_l = 2;
  cfg.m_r = 2;
  cfg.restarts = 3;
  Rng rng(49);
  // n = 20 <= 25 = ambient forces the pseudo-inverse fallback; n = 100
  // keeps exact mode.
  const BenchReport rep = monte_carlo(1, {20, 100}, {5}, 3, cfg, rng);

  REQUIRE(rep.cells.size() == 6);  // three folded methods x two n
  for (const CellStat& cell : rep.cells) {
    CHECK(cell.mean > 0.0);
    CHECK(cell.mean < 2.9);  // two rank-4 projections cannot differ by more
    CHECK(cell.se > 0.0);
    CHECK(cell.se < cell.mean);
    CHECK(cell.failures == 0);
    CHECK(cell.inversion == (cell.n <= 25 ? "pseudo" : "exact"));
  }
  CHECK(rep.trace_violations == 0);
  CHECK(rep.runtime_sec > 0.0);

  REQUIRE(rep.benchmarks.size() == 1);
  CHECK(rep.benchmarks[0].first == 5);
  // Random-pair reference distance for 25-dimensional rank-4 spans.
  CHECK(rep.benchmarks[0].second.mean == doctest::Approx(2.586).epsilon(0.012));
}

TEST_CASE("structured fits dominate vectorized ones on the second model") {
  FoldingConfig cfg;
  cfg.m_l = 2;
  cfg.m_r = 2;
  cfg.restarts = 3;
  Rng rng(50);
  const BenchReport rep = monte_carlo(2, {500}, {5}, 6, cfg, rng);

  auto mean_of = [&](const std::string& name) {
    for (const CellStat& cell : rep.cells)
      if (cell.method == name) return cell.mean;
    REQUIRE(false);
    return 0.0;
  };
  CHECK(mean_of("folded-sir") < 0.5 * mean_of("sir"));
  CHECK(mean_of("folded-save") < 0.5 * mean_of("save"));
  CHECK(mean_of("folded-dr") < 0.5 * mean_of("dr"));

  // Rough location checks against long-run levels for this sample size.
  CHECK(mean_of("folded-dr") == doctest::Approx(0.157).epsilon(0.45));
  CHECK(mean_of("sir") == doctest::Approx(1.76).epsilon(0.25));
}

TEST_CASE("csv and json layouts carry every cell of the report") {
  FoldingConfig cfg;
  cfg.m_l = 2;
  cfg.m_r = 2;
  cfg.restarts = 2;
  Rng rng(51);
  const std::vector<Index> n_list = {60, 90};
  const BenchReport rep = monte_carlo(1, n_list, {4, 5}, 2, cfg, rng);
  REQUIRE(rep.cells.size() == 12);  // 3 methods x 2 p x 2 n

  const std::string csv = bench_csv(rep, n_list);
  CHECK(csv.find("method,p,n60,n90") == 0);
  CHECK(csv.find("folded-sir,4,") != std::string::npos);
  CHECK(csv.find("folded-dr,5,") != std::string::npos);
  // One header plus one row per (method, p) pair.
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);

  const std::string js = bench_json(rep, n_list);
  CHECK(js.find("\"table\": 1") != std::string::npos);
  CHECK(js.find("\"trace_violations\": 0") != std::string::npos);
  CHECK(js.find("\"folded-save\"") != std::string::npos);
  CHECK(js.find("\"benchmarks\"") != std::string::npos);
}
