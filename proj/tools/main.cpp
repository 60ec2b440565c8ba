#include <iostream>

#include "cli_app.hpp"

int main(int argc, char** argv) { return tofrgbd::cli::run(argc, argv, std::cout, std::cerr); }
