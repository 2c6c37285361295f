#include <iostream>

#include "grammar_steer/cli.h"

int main(int argc, char** argv) { return grammar_steer::run_cli(argc, argv, std::cout, std::cerr); }
