#include "srl/cli.hpp"

int main(int argc, char** argv) { return srl::cli::run(argc, argv); }
