#include <string>
#include <vector>

#include "decompound/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return decompound::run_cli(args);
}
