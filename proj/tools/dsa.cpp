#include <string>
#include <vector>

#include "dsa/cli/pipeline.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return dsa::cli::run(std::move(args));
}
