#include <string>
#include <vector>

#include "jumpdiff/cli.hpp"

int main(int argc, char** argv) {
    return jumpdiff::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
