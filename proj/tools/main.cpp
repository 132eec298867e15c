#include <iostream>

#include "nctj/cli.hpp"

int main(int argc, char** argv) {
  return nctj::harness::run_cli(argc, argv, std::cout, std::cerr);
}
