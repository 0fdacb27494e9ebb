#include "s2dip/cli.hpp"

int main(int argc, char** argv) { return s2dip::cli::cli_main(argc, argv); }
