#include <iostream>

#include "n2i/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return n2i::run_cli(args, std::cout, std::cerr);
}
