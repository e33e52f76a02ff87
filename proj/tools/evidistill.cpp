#include <iostream>
#include <string>
#include <vector>

#include "evidistill/cli.hpp"

int main(int argc, char** argv) {
  return evidistill::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
