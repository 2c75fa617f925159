// foldkit_main.cpp — executable wrapper around the CLI.

#include "foldkit/cli.hpp"

int main(int argc, char** argv) { return foldkit::run_cli(argc, argv); }
