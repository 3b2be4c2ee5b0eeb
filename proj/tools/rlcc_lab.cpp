#include "rlcc_lab/cli.hpp"

int main(int argc, char** argv) { return rlcc::cli_main(argc, argv); }
