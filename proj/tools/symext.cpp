#include <iostream>
#include <string>
#include <vector>

#include "symext_app.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return symext::app::run_symext(args, std::cout, std::cerr);
}
