#include "bregsmooth/cli.hpp"

int main(int argc, char** argv) { return bregsmooth::run_cli(argc, argv); }
