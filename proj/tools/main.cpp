#include <iostream>

#include "flexmarket/cli.hpp"

int main(int argc, char** argv) { return flexmarket::run_cli(argc, argv, std::cout, std::cerr); }
