#include "stellbench/cli.hpp"

int main(int argc, char** argv) { return stellbench::cli_dispatch(argc, argv); }
