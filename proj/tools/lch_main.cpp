#include "lch/cli.hpp"

int main(int argc, char** argv) { return lch::cli::main_entry(argc, argv); }
