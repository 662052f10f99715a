#include <iostream>

#include "gcnbert/cli.hpp"

int main(int argc, char** argv) { return gcnbert::run_cli(argc, argv, std::cout, std::cerr); }
