#include <iostream>

#include "licap/cli.hpp"

int main(int argc, char** argv) { return licap::run_cli(argc, argv, std::cout, std::cerr); }
