#include "cli.hpp"

int main(int argc, char** argv) { return twowall::cli::run_cli(argc, argv); }
