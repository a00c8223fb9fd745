#include <iostream>

#include "pageprobe/cli.hpp"

int main(int argc, char** argv) {
  return pageprobe::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
