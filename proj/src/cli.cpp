// cli.cpp — the foldkit command-line tool.
//
// Every run is deterministic given (input files, flags, seed).  Options
// may come from a JSON --config file; explicit flags override file values.

#include "foldkit/cli.hpp"

#include <cstdint>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "foldkit/envelope.hpp"
#include "foldkit/io.hpp"
#include "foldkit/moments.hpp"
#include "foldkit/pipeline.hpp"
#include "foldkit/rng.hpp"
#include "foldkit/simbench.hpp"
#include "foldkit/tensor_ops.hpp"

namespace foldkit {

namespace {

// ===========================================================================
// Option plumbing
// ===========================================================================

// Raw flag storage for all subcommands (only the parsed one reads them).
struct Options {
  std::string dataset;
  std::string config_path;
  std::string method;
  int slices = 0;
  long ml = 0, mr = 0;
  long screen_l = 0, screen_r = 0;
  std::string inversion;
  double epsilon = 0.0;
  double tol = 0.0;
  int restarts = 0;
  int max_iters = 0;
  std::uint64_t seed = 0;
  std::string out;
  // simulate / bench specifics
  std::string model = "example1";
  long n = 100;
  long p = 5;
  double mu = 3.0;
  double pi = 0.5;
  int table = 1;
  int reps = 100;
  std::vector<long> p_list;
  std::vector<long> n_list;
};

// Flag values merged over the configuration file.
struct Settings {
  std::optional<std::string> method;
  std::optional<int> slices;
  std::optional<Index> ml, mr;
  std::optional<Index> screen_l, screen_r;
  std::string inversion = "exact";
  std::optional<double> epsilon;
  double tol = 1e-9;
  int restarts = 5;
  int max_iters = 500;
  std::uint64_t seed = 0;
  bool normalize = true;
};

// True when the subcommand both defines and received the flag.
bool flag_given(const CLI::App& sub, const std::string& name) {
  const CLI::Option* opt = sub.get_option_no_throw(name);
  return opt != nullptr && opt->count() > 0;
}

Settings merge_settings(const CLI::App& sub, const Options& o) {
  Settings st;
  if (flag_given(sub, "--config")) {
    const RunConfig rc = read_run_config(o.config_path);
    if (rc.method.has_value()) st.method = *rc.method;
    if (rc.slices.has_value()) st.slices = *rc.slices;
    if (rc.ml.has_value()) st.ml = *rc.ml;
    if (rc.mr.has_value()) st.mr = *rc.mr;
    if (rc.screen_l.has_value()) st.screen_l = *rc.screen_l;
    if (rc.screen_r.has_value()) st.screen_r = *rc.screen_r;
    if (rc.inversion.has_value()) st.inversion = *rc.inversion;
    if (rc.epsilon.has_value()) st.epsilon = *rc.epsilon;
    if (rc.tol.has_value()) st.tol = *rc.tol;
    if (rc.restarts.has_value()) st.restarts = *rc.restarts;
    if (rc.max_iters.has_value()) st.max_iters = *rc.max_iters;
    if (rc.seed.has_value()) st.seed = *rc.seed;
    if (rc.normalize_bases.has_value()) st.normalize = *rc.normalize_bases;
  }
  if (flag_given(sub, "--method")) st.method = o.method;
  if (flag_given(sub, "--slices")) st.slices = o.slices;
  if (flag_given(sub, "--ml")) st.ml = static_cast<Index>(o.ml);
  if (flag_given(sub, "--mr")) st.mr = static_cast<Index>(o.mr);
  if (flag_given(sub, "--screen-l"))
    st.screen_l = static_cast<Index>(o.screen_l);
  if (flag_given(sub, "--screen-r"))
    st.screen_r = static_cast<Index>(o.screen_r);
  if (flag_given(sub, "--inversion")) st.inversion = o.inversion;
  if (flag_given(sub, "--epsilon")) st.epsilon = o.epsilon;
  if (flag_given(sub, "--tol")) st.tol = o.tol;
  if (flag_given(sub, "--restarts")) st.restarts = o.restarts;
  if (flag_given(sub, "--max-iters")) st.max_iters = o.max_iters;
  if (flag_given(sub, "--seed")) st.seed = o.seed;
  return st;
}

template <typename T>
T require_key(const std::optional<T>& v, const char* key) {
  if (!v.has_value())
    throw ParseError(
        std::string("missing required configuration key '") + key + "'", 0,
        0);
  return *v;
}

// "sir|save|dr" fit folded bases; the "c"-prefixed names are the
// vectorize-first baselines of the same moment family.
ClassifyMethod resolve_method(const std::string& name) {
  if (name == "sir") return {TargetMethod::sir, true};
  if (name == "save") return {TargetMethod::save, true};
  if (name == "dr") return {TargetMethod::dr, true};
  if (name == "csir") return {TargetMethod::sir, false};
  if (name == "csave") return {TargetMethod::save, false};
  if (name == "cdr") return {TargetMethod::dr, false};
  throw ParseError("unknown method '" + name +
                       "' (expected sir|save|dr|csir|csave|cdr)",
                   0, 0);
}

InversionMode resolve_inversion(const Settings& st) {
  if (st.inversion == "exact") return InversionMode::Exact();
  if (st.inversion == "pinv") return InversionMode::Pseudo();
  if (st.inversion == "ridge") {
    if (!st.epsilon.has_value())
      throw ParseError(
          "missing required configuration key 'epsilon' (ridge inversion "
          "needs a shift)",
          0, 0);
    return InversionMode::Ridge(*st.epsilon);
  }
  throw ParseError("unknown inversion mode '" + st.inversion +
                       "' (expected exact|pinv|ridge)",
                   0, 0);
}

FoldingConfig make_folding_config(const Settings& st, Index m_l, Index m_r) {
  FoldingConfig cfg;
  cfg.m_l = m_l;
  cfg.m_r = m_r;
  cfg.max_iters = st.max_iters;
  cfg.rel_tol = st.tol;
  cfg.restarts = st.restarts;
  cfg.inversion = resolve_inversion(st);
  cfg.seed = st.seed;
  cfg.normalize_bases = st.normalize;
  return cfg;
}

// Default slice count: one per label for categorical responses, else 5.
int resolve_slices(const Settings& st, const SampleSet& samples) {
  if (st.slices.has_value()) return *st.slices;
  if (samples.response == ResponseKind::categorical) {
    std::set<double> labels(samples.y.begin(), samples.y.end());
    return static_cast<int>(labels.size());
  }
  return 5;
}

std::string json_vector(const std::vector<double>& v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) out += ", ";
    out += fmt17(v[i]);
  }
  out += "]";
  return out;
}

// ===========================================================================
// fit
// ===========================================================================

int cmd_fit(const CLI::App& sub, const Options& o) {
  const Settings st = merge_settings(sub, o);
  const SampleSet samples = read_dataset(o.dataset);
  const ClassifyMethod method = resolve_method(require_key(st.method,
                                                           "method"));
  if (!method.folded)
    throw ParseError("method '" + *st.method +
                         "' is a vectorize-first baseline; fit requires "
                         "sir, save, or dr",
                     0, 0);
  const Index m_l = require_key(st.ml, "ml");
  const Index m_r = require_key(st.mr, "mr");
  const int s = resolve_slices(st, samples);

  // Optional spectral pre-screening before fitting.
  const bool screened =
      st.screen_l.has_value() || st.screen_r.has_value();
  SampleSet work = samples;
  ScreenBases bases;
  if (screened) {
    const Index s_l = st.screen_l.value_or(samples.p_l);
    const Index s_r = st.screen_r.value_or(samples.p_r);
    auto pr = prescreen(samples, s_l, s_r);
    bases = std::move(pr.first);
    work = std::move(pr.second);
  }

  const FoldingConfig cfg = make_folding_config(st, m_l, m_r);
  const FoldingFit fit = fit_folded(work, method.base, s, cfg);

  // Reduced predictors a' X b for every sample (screened coordinates).
  Matrix reduced(work.n(), m_l * m_r);
  for (Index i = 0; i < work.n(); ++i)
    reduced.row(i) = vec(fit.a.transpose() * work.x[i] * fit.b).transpose();

  std::ostringstream js;
  js << "{\n";
  js << "  \"method\": " << json_quote(*st.method) << ",\n";
  js << "  \"slices\": " << s << ",\n";
  js << "  \"ml\": " << m_l << ",\n";
  js << "  \"mr\": " << m_r << ",\n";
  js << "  \"inversion\": " << json_quote(to_string(cfg.inversion)) << ",\n";
  js << "  \"seed\": " << cfg.seed << ",\n";
  js << "  \"converged\": " << (fit.converged ? "true" : "false") << ",\n";
  js << "  \"restart_index\": " << fit.restart_index << ",\n";
  js << "  \"objective\": "
     << fmt17(fit.objective_trace.empty() ? 0.0 : fit.objective_trace.back())
     << ",\n";
  js << "  \"objective_trace\": " << json_vector(fit.objective_trace)
     << ",\n";
  if (screened) {
    js << "  \"screen_left\": " << json_matrix(bases.left) << ",\n";
    js << "  \"screen_right\": " << json_matrix(bases.right) << ",\n";
  }
  js << "  \"a\": " << json_matrix(fit.a) << ",\n";
  js << "  \"b\": " << json_matrix(fit.b) << ",\n";
  js << "  \"f\": [";
  for (std::size_t w = 0; w < fit.f.size(); ++w)
    js << (w ? ", " : "") << json_matrix(fit.f[w]);
  js << "],\n";
  js << "  \"y\": " << json_vector(samples.y) << ",\n";
  js << "  \"reduced_predictors\": " << json_matrix(reduced) << "\n";
  js << "}\n";
  std::cout << js.str();

  if (flag_given(sub, "--out")) {
    atomic_write_file(o.out, js.str());
    std::ostringstream csv;
    csv << "y";
    for (Index k = 0; k < reduced.cols(); ++k) csv << ",z" << (k + 1);
    csv << "\n";
    for (Index i = 0; i < reduced.rows(); ++i) {
      csv << fmt17(samples.y[i]);
      for (Index k = 0; k < reduced.cols(); ++k)
        csv << "," << fmt17(reduced(i, k));
      csv << "\n";
    }
    atomic_write_file(o.out + ".reduced.csv", csv.str());
  }
  return 0;
}

// ===========================================================================
// simulate
// ===========================================================================

int cmd_simulate(const CLI::App& sub, const Options& o) {
  MixtureModelSpec spec;
  if (o.model == "example1") {
    spec.variant = MixtureVariant::example1;
  } else if (o.model == "example2") {
    spec.variant = MixtureVariant::example2;
  } else {
    throw ParseError("unknown model '" + o.model +
                         "' (expected example1|example2)",
                     0, 0);
  }
  spec.p = static_cast<Index>(o.p);
  spec.mu = o.mu;
  spec.pi = o.pi;

  Rng rng(o.seed);
  auto [samples, left, right] = gen_mixture(spec, static_cast<Index>(o.n),
                                            rng);
  write_dataset(o.out, samples);

  std::ostringstream truth;
  truth << "{\n";
  truth << "  \"model\": " << json_quote(o.model) << ",\n";
  truth << "  \"n\": " << o.n << ",\n";
  truth << "  \"p\": " << o.p << ",\n";
  truth << "  \"mu\": " << fmt17(o.mu) << ",\n";
  truth << "  \"pi\": " << fmt17(o.pi) << ",\n";
  truth << "  \"seed\": " << o.seed << ",\n";
  truth << "  \"true_left\": " << json_matrix(left) << ",\n";
  truth << "  \"true_right\": " << json_matrix(right) << "\n";
  truth << "}\n";
  atomic_write_file(o.out + ".truth.json", truth.str());

  (void)sub;
  return 0;
}

// ===========================================================================
// bench
// ===========================================================================

int cmd_bench(const CLI::App& sub, const Options& o) {
  const Settings st = merge_settings(sub, o);
  std::vector<Index> n_list;
  for (long n : o.n_list) n_list.push_back(static_cast<Index>(n));
  if (n_list.empty()) n_list = {100, 200, 300, 500, 800};
  std::vector<Index> p_list;
  for (long p : o.p_list) p_list.push_back(static_cast<Index>(p));
  if (p_list.empty()) p_list = {5};

  FoldingConfig cfg = make_folding_config(st, 2, 2);
  Rng rng(st.seed);
  const BenchReport report =
      monte_carlo(o.table, n_list, p_list, o.reps, cfg, rng, o.mu);

  for (const auto& [p, stat] : report.benchmarks)
    std::cout << "benchmark distance = " << fmt17(stat.mean)
              << " (p = " << p << ", se = " << fmt17(stat.se) << ")\n";
  const std::string csv = bench_csv(report, n_list);
  std::cout << csv;

  const std::string dir = flag_given(sub, "--out") ? o.out : ".";
  const std::string stem = dir + "/table" + std::to_string(o.table);
  atomic_write_file(stem + ".csv", csv);
  atomic_write_file(stem + ".json", bench_json(report, n_list));
  return 0;
}

// ===========================================================================
// classify
// ===========================================================================

int cmd_classify(const CLI::App& sub, const Options& o) {
  const Settings st = merge_settings(sub, o);
  const SampleSet samples = read_dataset(o.dataset);
  if (samples.response != ResponseKind::categorical)
    throw ParseError(
        "classification needs a categorical response (header 'response=cat')",
        0, 0);
  const ClassifyMethod method = resolve_method(require_key(st.method,
                                                           "method"));
  const Index m_l = require_key(st.ml, "ml");
  const Index m_r = require_key(st.mr, "mr");
  const int s = resolve_slices(st, samples);
  const Index s_l = st.screen_l.value_or(samples.p_l);
  const Index s_r = st.screen_r.value_or(samples.p_r);

  const FoldingConfig cfg = make_folding_config(st, m_l, m_r);
  const LoocvResult result =
      loocv_classify(samples, method, s, s_l, s_r, cfg);

  std::cout << result.correct << "/" << samples.n() << "\n";
  if (flag_given(sub, "--out")) {
    std::ostringstream csv;
    csv << "index,actual,predicted\n";
    for (Index i = 0; i < samples.n(); ++i)
      csv << i << "," << fmt17(samples.y[i]) << ","
          << fmt17(result.predictions[i]) << "\n";
    atomic_write_file(o.out, csv.str());
  }
  return 0;
}

// ===========================================================================
// wiring
// ===========================================================================

void add_solver_flags(CLI::App* c, Options& o) {
  c->add_option("--inversion", o.inversion, "exact|pinv|ridge");
  c->add_option("--epsilon", o.epsilon, "ridge shift (required with ridge)");
  c->add_option("--restarts", o.restarts, "random restarts");
  c->add_option("--tol", o.tol, "relative objective decrease tolerance");
  c->add_option("--max-iters", o.max_iters, "sweep limit per restart");
  c->add_option("--seed", o.seed, "RNG seed");
}

void add_fold_flags(CLI::App* c, Options& o) {
  c->add_option("--method", o.method, "sir|save|dr|csir|csave|cdr");
  c->add_option("--slices", o.slices, "response slices (default: one per "
                                      "label, or 5 when continuous)");
  c->add_option("--ml", o.ml, "left folded dimension");
  c->add_option("--mr", o.mr, "right folded dimension");
  c->add_option("--screen-l", o.screen_l, "left pre-screen size");
  c->add_option("--screen-r", o.screen_r, "right pre-screen size");
  add_solver_flags(c, o);
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"foldkit: Kronecker-structured dimension folding for "
               "matrix-valued predictors"};
  app.require_subcommand(1);
  Options o;

  CLI::App* fit = app.add_subcommand(
      "fit", "Fit a folded basis and emit a JSON report");
  fit->add_option("dataset", o.dataset, "input dataset file")->required();
  fit->add_option("--config", o.config_path, "JSON run configuration");
  add_fold_flags(fit, o);
  fit->add_option("--out", o.out,
                  "also write the JSON report here plus a .reduced.csv "
                  "sidecar of y and a'Xb coordinates");

  CLI::App* sim = app.add_subcommand(
      "simulate", "Draw a synthetic mixture dataset and its true bases");
  sim->add_option("--model", o.model, "example1|example2");
  sim->add_option("--n", o.n, "sample size");
  sim->add_option("--p", o.p, "matrix side length");
  sim->add_option("--mu", o.mu, "class-1 mean offset");
  sim->add_option("--pi", o.pi, "class-1 probability");
  sim->add_option("--seed", o.seed, "RNG seed");
  sim->add_option("--out", o.out, "output dataset path (truth sidecar at "
                                  "<out>.truth.json)")
      ->required();

  CLI::App* bench = app.add_subcommand(
      "bench", "Monte-Carlo comparison tables with benchmark distances");
  bench->add_option("--table", o.table, "1 (folded methods) or 2 "
                                        "(folded vs conventional)");
  bench->add_option("-N,--reps", o.reps, "replications per cell");
  bench->add_option("--mu", o.mu, "class-1 mean offset");
  bench->add_option("--p-list", o.p_list, "matrix sizes")->delimiter(',');
  bench->add_option("--n-list", o.n_list, "sample sizes")->delimiter(',');
  bench->add_option("--config", o.config_path, "JSON run configuration");
  add_solver_flags(bench, o);
  bench->add_option("--out", o.out, "output directory (default .)");

  CLI::App* cls = app.add_subcommand(
      "classify", "Leave-one-out cross-validated classification");
  cls->add_option("dataset", o.dataset, "input dataset file")->required();
  cls->add_option("--config", o.config_path, "JSON run configuration");
  add_fold_flags(cls, o);
  cls->add_option("--out", o.out, "per-item prediction CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand(fit)) return cmd_fit(*fit, o);
    if (app.got_subcommand(sim)) return cmd_simulate(*sim, o);
    if (app.got_subcommand(bench)) return cmd_bench(*bench, o);
    if (app.got_subcommand(cls)) return cmd_classify(*cls, o);
    std::cerr << "error: no subcommand\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const DimensionError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const SingularityError& e) {
    std::cerr << "numerical singularity: " << e.what() << "\n"
              << "hint: rerun with --inversion ridge --epsilon <shift> "
                 "(or --inversion pinv)\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace foldkit
