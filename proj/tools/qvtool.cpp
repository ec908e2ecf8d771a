#include <iostream>

#include "qv/cli.hpp"

int main(int argc, char** argv) { return qv::cli::main(argc, argv, std::cout, std::cerr); }
