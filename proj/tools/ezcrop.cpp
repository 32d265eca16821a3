#include <iostream>
#include <string>
#include <vector>

#include "ezcrop/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ezcrop::cli::run(args, std::cout, std::cerr);
}
