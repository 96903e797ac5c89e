#include <iostream>

#include "bohmlab/cli.hpp"

int main(int argc, char** argv) {
  return bohmlab::cli::cli_run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
