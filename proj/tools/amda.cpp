#include <iostream>

#include "amda/cli.hpp"

int main(int argc, char** argv) {
  return amda::cli::dispatch(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
