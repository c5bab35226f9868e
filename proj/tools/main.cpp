#include <iostream>

#include "pipeline.hpp"

int main(int argc, char** argv) { return trajan::cli::run(argc, argv, std::cout, std::cerr); }
