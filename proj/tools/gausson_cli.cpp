#include "cli_commands.hpp"

int main(int argc, char** argv) { return gausson::cli::run_cli(argc, argv); }
