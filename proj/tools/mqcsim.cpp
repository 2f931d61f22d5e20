#include <iostream>

#include "mqcsim/cli.hpp"

int main(int argc, char** argv) { return mqcsim::run_cli(argc, argv, std::cout, std::cerr); }
