#include <iostream>

#include "spamdet/cli.h"

int main(int argc, char** argv) { return spamdet::run_cli(argc, argv, std::cout, std::cerr); }
