#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <iostream>

#include "mdctcodec/cli.hpp"

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("mdctcodec"));
  spdlog::set_pattern("[%l] %v");
  return mdctcodec::run_cli(argc, argv, std::cout, std::cerr);
}
