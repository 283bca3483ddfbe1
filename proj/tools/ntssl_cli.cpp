#include <iostream>

#include "ntssl/cli.hpp"

int main(int argc, char** argv) { return ntssl::run_cli(argc, argv, std::cout, std::cerr); }
