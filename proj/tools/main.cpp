#include <iostream>
#include <string>
#include <vector>

#include "womble/cli.hpp"

int main(int argc, char** argv) {
  return womble::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
