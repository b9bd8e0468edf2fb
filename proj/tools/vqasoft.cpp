#include <string>
#include <vector>

#include "vqasoft/cli.hpp"

int main(int argc, char** argv) {
    return vqasoft::cli::run(std::vector<std::string>(argv, argv + argc));
}
