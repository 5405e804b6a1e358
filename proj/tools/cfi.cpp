#include "cfi/cli.hpp"

int main(int argc, char** argv) { return cfi::cli::run_cli(argc, argv); }
