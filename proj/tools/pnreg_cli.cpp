// Command line front end; all logic lives in pnreg/cli.hpp so the test
// suite can drive the same code paths in-process.
#include "pnreg/cli.hpp"

int main(int argc, char** argv) { return pnreg::cli::cli_main(argc, argv); }
