#include "discom/cli/cli.hpp"

int main(int argc, char** argv) { return discom::cli::main_entry(argc, argv); }
