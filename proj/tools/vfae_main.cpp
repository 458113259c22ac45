#include <iostream>

#include "vfae/cli.hpp"

int main(int argc, char** argv) { return vfae::cli::run(argc, argv, std::cout, std::cerr); }
