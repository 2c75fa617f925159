// io.hpp — dataset files, run configuration, and deterministic output.
//
// Dataset format: one header line
//     # foldkit v1 pL=<int> pR=<int> response=<cont|cat>
// followed by n rows of `response value` + pL*pR predictor entries in
// column-stacked order, whitespace separated.
//
// All numeric output goes through fmt17 (17 significant digits) and files
// are written atomically (temp + rename), so identical inputs and seeds
// produce byte-identical files.

#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "foldkit/moments.hpp"

namespace foldkit {

// ===========================================================================
// Errors
// ===========================================================================

// Malformed input file; carries 1-based line and column of the offender.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, long line, long column)
      : std::runtime_error(msg + " (line " + std::to_string(line) +
                           ", column " + std::to_string(column) + ")"),
        line(line),
        column(column) {}
  long line;
  long column;
};

// Filesystem failure (open/write/rename).
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// ===========================================================================
// Formatting / filesystem
// ===========================================================================

// Decimal, 17 significant digits: enough to round-trip any double.
std::string fmt17(double v);

// Write content to path via a temporary file and rename.
void atomic_write_file(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

// ===========================================================================
// Datasets
// ===========================================================================

SampleSet parse_dataset(const std::string& text);
SampleSet read_dataset(const std::string& path);
std::string dataset_to_string(const SampleSet& samples);
void write_dataset(const std::string& path, const SampleSet& samples);

// ===========================================================================
// Run configuration
// ===========================================================================

// Keys a run-configuration document may set; everything optional so the
// command line can fill gaps (flags override file values).  Unknown keys
// are rejected at parse time.
struct RunConfig {
  std::optional<std::string> method;      // sir|save|dr|csir|csave|cdr
  std::optional<int> slices;
  std::optional<Index> ml, mr;
  std::optional<Index> screen_l, screen_r;
  std::optional<std::string> inversion;   // exact|pinv|ridge
  std::optional<double> epsilon;
  std::optional<int> restarts;
  std::optional<double> tol;
  std::optional<int> max_iters;
  std::optional<std::uint64_t> seed;
  std::optional<bool> normalize_bases;
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig read_run_config(const std::string& path);

// ===========================================================================
// Minimal deterministic JSON emission
// ===========================================================================

// Serialize a matrix as JSON rows with fmt17 entries.
std::string json_matrix(const Matrix& m);
std::string json_quote(const std::string& s);

}  // namespace foldkit
