#include <iostream>

#include "qsynth/cli.hpp"

int main(int argc, char** argv) {
  return qsynth::cli::cli_main(argc, argv, std::cout, std::cerr);
}
