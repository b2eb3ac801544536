#include "novelty/cli.hpp"

int main(int argc, char **argv) { return novelty::cli::run(argc, argv); }
