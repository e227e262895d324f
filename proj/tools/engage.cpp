#include <string>
#include <vector>

#include "engage/cli.hpp"
#include "engage/serve.hpp"

int main(int argc, char** argv) {
  engage::cli::serve_hook() = &engage::serve;
  return engage::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
