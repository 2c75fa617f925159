// cli.hpp — command-line entry point.
//
// Subcommands: fit, simulate, bench, classify.  Exit codes: 0 success,
// 2 input/parse error, 3 numerical singularity (message names the remedy
// flags), 4 I/O failure.

#pragma once

namespace foldkit {

int run_cli(int argc, char** argv);

}  // namespace foldkit
