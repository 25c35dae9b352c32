#include "aost/cli.hpp"

int main(int argc, char** argv) { return aost::run_cli(argc, argv); }
