#include <iostream>

#include "lbc/cli.hpp"

int main(int argc, char** argv) { return lbc::cli::dispatch(argc, argv, std::cout, std::cerr); }
