#include <iostream>
#include <string>
#include <vector>

#include "codewatch/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return codewatch::cli::dispatch(args, std::cout, std::cerr, codewatch::cli::process_environment());
}
