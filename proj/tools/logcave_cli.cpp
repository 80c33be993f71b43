#include <iostream>

#include "logcave/cli.hpp"

int main(int argc, char** argv) { return logcave::cli_main(argc, argv, std::cout, std::cerr); }
