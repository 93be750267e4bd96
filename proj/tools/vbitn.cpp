#include <iostream>
#include <string>
#include <vector>

#include "vbitn/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return vbitn::run_cli(args, std::cout, std::cerr);
}
