#include <iostream>
#include <string>
#include <vector>

#include "trunc_ellipse/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return trunc_ellipse::cli::dispatch(args, std::cout, std::cerr);
}
