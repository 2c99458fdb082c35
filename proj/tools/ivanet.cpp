#include <iostream>

#include "ivanet/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return ivanet::run_cli(args, std::cout, std::cerr);
}
