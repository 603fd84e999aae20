#include "drnav/cli.hpp"

int main(int argc, char** argv) { return drnav::run_cli(argc, argv); }
