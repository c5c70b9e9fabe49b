#include "rsrg/cli.hpp"

int main(int argc, char** argv) { return rsrg::cli_main(argc, argv); }
