#include "dald/cli.hpp"

int main(int argc, char** argv) { return dald::run_cli(argc, argv); }
