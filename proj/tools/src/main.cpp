#include "nlca_cli/run_cli.hpp"

int main(int argc, char** argv) { return nlca::cli::run(argc, argv); }
