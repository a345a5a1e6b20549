#include <iostream>

#include "kra/cli.hpp"

int main(int argc, char** argv) { return kra::run_cli(argc, argv, std::cout, std::cerr); }
