#include <iostream>

#include "affiltest_cli/cli.hpp"

int main(int argc, char** argv) { return affiltest::cli::run(argc, argv, std::cout, std::cerr); }
