#include "hmgdyn/cli.hpp"

int main(int argc, char** argv) { return hmgdyn::cli::run(argc, argv); }
