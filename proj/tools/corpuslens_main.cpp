#include <iostream>

#include "corpuslens/cli.hpp"

int main(int argc, char** argv) { return corpuslens::cli::run_cli(argc, argv, std::cout, std::cerr); }
