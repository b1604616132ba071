#include <iostream>

#include "vaelab/experiments.hpp"

int main(int argc, char** argv) { return vaelab::run_cli(argc, argv, std::cout, std::cerr); }
