#include "cli.hpp"

int main(int argc, char** argv) { return stereolive::cli::run_cli(argc, argv); }
