#include <string>
#include <vector>

#include "addsel/cli.hpp"

int main(int argc, char** argv) {
    return addsel::run_cli(std::vector<std::string>(argv, argv + argc));
}
