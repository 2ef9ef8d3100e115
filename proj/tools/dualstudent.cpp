#include <iostream>

#include "dualstudent/cli.hpp"

int main(int argc, char** argv) { return dualstudent::cli::main(argc, argv, std::cout, std::cerr); }
