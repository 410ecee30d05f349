#include <iostream>

#include "seastate/cli.hpp"

int main(int argc, char** argv) { return seastate::command_dispatch(argc, argv, std::cout, std::cerr); }
