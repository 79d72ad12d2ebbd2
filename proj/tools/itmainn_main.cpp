#include <iostream>
#include <string>
#include <vector>

#include "itmainn/cli/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return itmainn::cli::run(args, std::cout, std::cerr);
}
