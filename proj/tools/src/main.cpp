#include "asfem/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return asfem::cli::main_entry(argc, argv, std::cout, std::cerr); }
