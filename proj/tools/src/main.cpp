#include <iostream>

#include "mesh_cli/cli.hpp"

int main(int argc, char** argv) { return mesh::cli::run(argc, argv, std::cout, std::cerr); }
