#include <iostream>

#include "lqgent_cli.hpp"

int main(int argc, char** argv) { return lqgent::cli::run(argc, argv, std::cout, std::cerr); }
