#include "cbvf/cli.hpp"

int main(int argc, char** argv) { return cbvf::run_cli(argc, argv); }
