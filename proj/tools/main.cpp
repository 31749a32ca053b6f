#include <iostream>
#include <string>
#include <vector>

#include "beliefsim/app.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return beliefsim::app::main(args, std::cout, std::cerr);
}
