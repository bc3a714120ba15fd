#include "commands.hpp"

int main(int argc, char** argv) { return gridrecon::cli::main_entry(argc, argv); }
