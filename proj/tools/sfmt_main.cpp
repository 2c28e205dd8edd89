#include "sfmt/cli.hpp"

int main(int argc, char** argv) { return sfmt::cli_main(argc, argv); }
