#include <iostream>

#include "qmoe/cli.hpp"

int main(int argc, char** argv) { return qmoe::run_cli(argc, argv, std::cout, std::cerr); }
