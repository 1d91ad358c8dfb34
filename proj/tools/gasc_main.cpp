#include "gasc/cli.hpp"

int main(int argc, char** argv) { return gasc::run_cli(argc, argv); }
