#include "locomimic/cli_io.hpp"

#include <iostream>

int main(int argc, char** argv) {
  return locomimic::run_subcommand(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
