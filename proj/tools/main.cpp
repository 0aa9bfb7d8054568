#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) {
  auto parsed = taskcomm::cli::parse_args(argc, argv, std::cout, std::cerr);
  if (!parsed.config) return parsed.exit_code;
  return taskcomm::cli::run_main(*parsed.config, std::cout, std::cerr);
}
