#include <iostream>

#include <glog/logging.h>

#include "newscls/cli.hpp"

int main(int argc, char** argv) {
  google::InitGoogleLogging(argv[0]);
  return newscls::cli::run({argv + 1, argv + argc}, std::cout, std::cerr);
}
