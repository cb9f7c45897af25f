#include "cli.hpp"

int main(int argc, char** argv) { return cellgraph::cli::run(argc, argv); }
