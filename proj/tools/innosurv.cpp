#include <iostream>

#include "innosurv/cli.hpp"

int main(int argc, char** argv) { return innosurv::run_cli(argc, argv, std::cout, std::cerr); }
