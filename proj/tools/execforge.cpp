#include "execforge/cli.hpp"

int main(int argc, char** argv) { return execforge::cli_main(argc, argv); }
