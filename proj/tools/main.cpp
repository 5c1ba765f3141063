#include "skipgp/cli/commands.hpp"

int main(int argc, char** argv) { return skipgp::cli::run_cli(argc, argv); }
