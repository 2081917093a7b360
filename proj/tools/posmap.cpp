#include "posmap/cli.hpp"

int main(int argc, char** argv) { return posmap::cli::main_entry(argc, argv); }
