#include <iostream>
#include <string>
#include <vector>

#include "bitext/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return bitext::cli::run(args, std::cout, std::cerr);
}
