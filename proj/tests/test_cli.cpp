// test_cli.cpp — end-to-end checks of the command line tool.
//
// Every case drives the real binary (path in FOLDKIT_BIN) through
// std::system and inspects exit codes, streams, and output files.  The
// dataset reader/writer round-trip is exercised in-process against the
// files the binary produces.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "foldkit/io.hpp"
#include "foldkit/rng.hpp"
#include "foldkit/tensor_ops.hpp"

using namespace foldkit;
using nlohmann::json;

namespace {

std::string bin_path() {
  const char* env = std::getenv("FOLDKIT_BIN");
  REQUIRE_MESSAGE(env != nullptr, "FOLDKIT_BIN must point at the binary");
  return env;
}

std::string work_dir() {
  static std::string dir = [] {
    char tmpl[] = "/tmp/foldkit_cli_XXXXXX";
    char* made = mkdtemp(tmpl);
    REQUIRE(made != nullptr);
    return std::string(made);
  }();
  return dir;
}

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

RunResult run_cli(const std::string& args) {
  static int counter = 0;
  const std::string base = work_dir() + "/stream" + std::to_string(counter++);
  const std::string cmd =
      bin_path() + " " + args + " >" + base + ".out 2>" + base + ".err";
  const int raw = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = read_file(base + ".out");
  r.err = read_file(base + ".err");
  return r;
}

std::string path_in(const std::string& name) { return work_dir() + "/" + name; }

// A two-class dataset separated far beyond its noise floor.
SampleSet separable(Index n_per_class, Index p, double gap, Rng& rng) {
  SampleSet s;
  s.p_l = p;
  s.p_r = p;
  s.response = ResponseKind::categorical;
  for (Index i = 0; i < 2 * n_per_class; ++i) {
    const double label = (i < n_per_class) ? 0.0 : 1.0;
    Matrix x = 0.05 * rng.gaussian_matrix(p, p);
    if (label == 1.0) x(0, 0) += gap;
    s.x.push_back(x);
    s.y.push_back(label);
  }
  return s;
}

Matrix json_to_matrix(const json& rows) {
  const Index r = static_cast<Index>(rows.size());
  const Index c = static_cast<Index>(rows.at(0).size());
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j)
      m(i, j) = rows.at(static_cast<std::size_t>(i))
                    .at(static_cast<std::size_t>(j))
                    .get<double>();
  return m;
}

}  // namespace

// ===========================================================================
// Usage basics
// ===========================================================================

TEST_CASE("help succeeds and bad invocations fail cleanly") {
  CHECK(run_cli("--help").code == 0);
  CHECK(run_cli("fit --help").code == 0);
  CHECK(run_cli("").code == 2);
  CHECK(run_cli("frobnicate").code == 2);
  const RunResult r = run_cli("fit");  // missing dataset argument
  CHECK(r.code == 2);
}

// ===========================================================================
// simulate
// ===========================================================================

TEST_CASE("simulate writes reproducible, well-formed datasets") {
  const std::string a = path_in("sim_a.txt");
  const std::string b = path_in("sim_b.txt");
  const std::string flags = "simulate --model example1 --n 60 --p 5 --seed 5";
  CHECK(run_cli(flags + " --out " + a).code == 0);
  CHECK(run_cli(flags + " --out " + b).code == 0);
  CHECK(read_file(a) == read_file(b));
  CHECK(read_file(a + ".truth.json") == read_file(b + ".truth.json"));

  const std::string text = read_file(a);
  CHECK(text.rfind("# foldkit v1 pL=5 pR=5 response=cat", 0) == 0);

  const SampleSet s = read_dataset(a);
  CHECK(s.n() == 60);
  CHECK(s.p_l == 5);
  CHECK(s.p_r == 5);
  CHECK(s.response == ResponseKind::categorical);
  for (double y : s.y) CHECK((y == 0.0 || y == 1.0));

  // Writer round-trip reproduces the file byte for byte.
  CHECK(dataset_to_string(s) == text);

  // The sidecar records the planted bases.
  const json truth = json::parse(read_file(a + ".truth.json"));
  CHECK(truth.at("model") == "example1");
  CHECK(truth.at("n") == 60);
  const Matrix left = json_to_matrix(truth.at("true_left"));
  CHECK(left.rows() == 5);
  CHECK(left.cols() == 2);

  // A different seed changes the bytes.
  const std::string c = path_in("sim_c.txt");
  CHECK(run_cli("simulate --model example1 --n 60 --p 5 --seed 6 --out " + c)
            .code == 0);
  CHECK(read_file(a) != read_file(c));
}

// ===========================================================================
// fit
// ===========================================================================

TEST_CASE("fit estimates the planted span and reports it as json") {
  const std::string data = path_in("fit_data.txt");
  REQUIRE(run_cli("simulate --model example1 --n 200 --p 5 --seed 8 --out " +
                  data)
              .code == 0);

  const std::string out = path_in("fit_a.json");
  const RunResult r = run_cli("fit " + data +
                              " --method dr --ml 2 --mr 2 --seed 3 --out " +
                              out);
  REQUIRE(r.code == 0);

  const json doc = json::parse(r.out);
  CHECK(doc.at("method") == "dr");
  CHECK(doc.at("slices") == 2);
  CHECK(doc.at("converged") == true);
  CHECK(doc.at("objective").get<double>() >= 0.0);

  const Matrix a_hat = json_to_matrix(doc.at("a"));
  const Matrix b_hat = json_to_matrix(doc.at("b"));
  REQUIRE(a_hat.rows() == 5);
  REQUIRE(a_hat.cols() == 2);
  const json truth = json::parse(read_file(data + ".truth.json"));
  const Matrix truth_span = kron(json_to_matrix(truth.at("true_right")),
                                 json_to_matrix(truth.at("true_left")));
  CHECK(subspace_distance(kron(b_hat, a_hat), truth_span) < 0.7);

  // The file copy matches stdout, and the run is reproducible.
  CHECK(read_file(out) == r.out);
  const std::string out2 = path_in("fit_b.json");
  const RunResult r2 = run_cli("fit " + data +
                               " --method dr --ml 2 --mr 2 --seed 3 --out " +
                               out2);
  REQUIRE(r2.code == 0);
  CHECK(read_file(out) == read_file(out2));

  // Reduced predictors: header plus one line per item.
  const std::string csv = read_file(out + ".reduced.csv");
  CHECK(csv.rfind("y,z1,z2,z3,z4", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 201);
}

TEST_CASE("fit rejects baseline methods and missing settings by name") {
  const std::string data = path_in("fit_data2.txt");
  REQUIRE(run_cli("simulate --model example2 --n 80 --p 4 --seed 2 --out " +
                  data)
              .code == 0);

  RunResult r = run_cli("fit " + data + " --method csir --ml 1 --mr 1");
  CHECK(r.code == 2);
  CHECK(r.err.find("vectorize-first") != std::string::npos);

  r = run_cli("fit " + data + " --method dr --mr 1");
  CHECK(r.code == 2);
  CHECK(r.err.find("'ml'") != std::string::npos);

  r = run_cli("fit " + data + " --ml 1 --mr 1");
  CHECK(r.code == 2);
  CHECK(r.err.find("'method'") != std::string::npos);

  r = run_cli("fit " + data +
              " --method dr --ml 1 --mr 1 --inversion ridge");
  CHECK(r.code == 2);
  CHECK(r.err.find("epsilon") != std::string::npos);

  r = run_cli("fit " + data + " --method dr --ml 1 --mr 1 --inversion lu");
  CHECK(r.code == 2);
}

TEST_CASE("config files merge under explicit flags") {
  const std::string data = path_in("cfg_data.txt");
  REQUIRE(run_cli("simulate --model example1 --n 80 --p 4 --seed 9 --out " +
                  data)
              .code == 0);

  const std::string cfg = path_in("run.json");
  atomic_write_file(cfg,
                    "{\"method\": \"save\", \"ml\": 1, \"mr\": 2, "
                    "\"seed\": 12, \"restarts\": 3}\n");
  RunResult r = run_cli("fit " + data + " --config " + cfg);
  REQUIRE(r.code == 0);
  json doc = json::parse(r.out);
  CHECK(doc.at("method") == "save");
  CHECK(doc.at("ml") == 1);
  CHECK(doc.at("mr") == 2);
  CHECK(doc.at("seed") == 12);

  // A flag on the command line wins over the file.
  r = run_cli("fit " + data + " --config " + cfg + " --method sir --ml 2");
  REQUIRE(r.code == 0);
  doc = json::parse(r.out);
  CHECK(doc.at("method") == "sir");
  CHECK(doc.at("ml") == 2);
  CHECK(doc.at("mr") == 2);

  // Unknown keys and malformed files are named in the error.
  const std::string bad = path_in("bad.json");
  atomic_write_file(bad, "{\"method\": \"sir\", \"budget\": 4}\n");
  r = run_cli("fit " + data + " --config " + bad);
  CHECK(r.code == 2);
  CHECK(r.err.find("'budget'") != std::string::npos);

  atomic_write_file(bad, "{\"method\": \n");
  r = run_cli("fit " + data + " --config " + bad);
  CHECK(r.code == 2);
}

TEST_CASE("parse errors cite the offending line") {
  const std::string bad = path_in("truncated.txt");
  atomic_write_file(bad,
                    "# foldkit v1 pL=2 pR=2 response=cat\n"
                    "0 1 2 3 4\n"
                    "1 5 6 7\n");  // one field short
  RunResult r = run_cli("fit " + bad + " --method dr --ml 1 --mr 1");
  CHECK(r.code == 2);
  CHECK(r.err.find("input error") != std::string::npos);
  CHECK(r.err.find("line 3") != std::string::npos);

  atomic_write_file(bad,
                    "# foldkit v1 pL=2 pR=2 response=cat\n"
                    "0 1 2 three 4\n"
                    "1 5 6 7 8\n");
  r = run_cli("fit " + bad + " --method dr --ml 1 --mr 1");
  CHECK(r.code == 2);
  CHECK(r.err.find("line 2") != std::string::npos);
  CHECK(r.err.find("column") != std::string::npos);

  // Missing files surface as i/o failures, not parse errors.
  r = run_cli("fit " + path_in("no_such_file.txt") +
              " --method dr --ml 1 --mr 1");
  CHECK(r.code == 4);
}

TEST_CASE("singular covariances exit with the numerical code and a hint") {
  const std::string data = path_in("thin.txt");
  REQUIRE(run_cli("simulate --model example1 --n 20 --p 5 --seed 4 --out " +
                  data)
              .code == 0);
  const RunResult r =
      run_cli("fit " + data + " --method dr --ml 2 --mr 2");
  CHECK(r.code == 3);
  CHECK(r.err.find("singular") != std::string::npos);
  CHECK(r.err.find("--inversion ridge") != std::string::npos);

  CHECK(run_cli("fit " + data +
                " --method dr --ml 2 --mr 2 --inversion pinv")
            .code == 0);
  CHECK(run_cli("fit " + data +
                " --method dr --ml 2 --mr 2 --inversion ridge "
                "--epsilon 1e-4")
            .code == 0);
}

// ===========================================================================
// bench
// ===========================================================================

TEST_CASE("bench writes stable tables and a benchmark line") {
  const std::string dir1 = path_in("bench1");
  const std::string dir2 = path_in("bench2");
  REQUIRE(std::system(("mkdir -p " + dir1 + " " + dir2).c_str()) == 0);
  const std::string flags =
      "bench --table 2 --reps 2 --n-list 60,90 --p-list 4 --seed 11";

  const RunResult r = run_cli(flags + " --out " + dir1);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("benchmark distance = ") != std::string::npos);
  CHECK(r.out.find("(p = 4") != std::string::npos);
  CHECK(r.out.find("method,p,n60,n90") != std::string::npos);

  const std::string csv = read_file(dir1 + "/table2.csv");
  CHECK(csv.find("folded-sir,4,") != std::string::npos);
  CHECK(csv.find("dr,4,") != std::string::npos);
  const std::string js = read_file(dir1 + "/table2.json");
  CHECK(js.find("\"trace_violations\"") != std::string::npos);
  CHECK(js.find("\"cells\"") != std::string::npos);

  // Same seed, same bytes (the json differs only in measured runtime).
  REQUIRE(run_cli(flags + " --out " + dir2).code == 0);
  CHECK(read_file(dir2 + "/table2.csv") == csv);
  json j1 = json::parse(js);
  json j2 = json::parse(read_file(dir2 + "/table2.json"));
  CHECK(j1.at("runtime_sec").get<double>() > 0.0);
  j1.erase("runtime_sec");
  j2.erase("runtime_sec");
  CHECK(j1 == j2);

  CHECK(run_cli("bench --table 3 --reps 1").code == 2);
}

// ===========================================================================
// classify
// ===========================================================================

TEST_CASE("classify tallies leave-one-out predictions") {
  Rng rng(71);
  const SampleSet s = separable(8, 3, 8.0, rng);
  const std::string data = path_in("classes.txt");
  atomic_write_file(data, dataset_to_string(s));

  const std::string preds = path_in("preds.csv");
  const RunResult r = run_cli("classify " + data +
                              " --method sir --ml 1 --mr 1 --seed 7 --out " +
                              preds);
  REQUIRE(r.code == 0);
  CHECK(r.out == "16/16\n");

  const std::string csv = read_file(preds);
  CHECK(csv.rfind("index,actual,predicted", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 17);

  // Continuous responses cannot be classified.
  SampleSet cont = s;
  cont.response = ResponseKind::continuous;
  for (std::size_t i = 0; i < cont.y.size(); ++i)
    cont.y[i] = static_cast<double>(i);
  const std::string cdata = path_in("cont.txt");
  atomic_write_file(cdata, dataset_to_string(cont));
  const RunResult bad =
      run_cli("classify " + cdata + " --method sir --ml 1 --mr 1");
  CHECK(bad.code == 2);
  CHECK(bad.err.find("categorical") != std::string::npos);
}

TEST_CASE("classify handles a cohort-sized screened problem") {
  Rng rng(72);
  const SampleSet s = separable(61, 8, 6.0, rng);
  const std::string data = path_in("cohort.txt");
  atomic_write_file(data, dataset_to_string(s));

  const RunResult r = run_cli(
      "classify " + data +
      " --method dr --ml 2 --mr 2 --screen-l 4 --screen-r 4 --seed 1");
  REQUIRE(r.code == 0);
  const std::size_t slash = r.out.find('/');
  REQUIRE(slash != std::string::npos);
  CHECK(r.out.substr(slash) == "/122\n");
  const long correct = std::stol(r.out.substr(0, slash));
  CHECK(correct >= 100);  // far-separated classes classify almost perfectly
  CHECK(correct <= 122);
}
