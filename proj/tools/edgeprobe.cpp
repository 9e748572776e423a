#include <iostream>

#include "edgeprobe/commands.hpp"

int main(int argc, char** argv) {
    return edgeprobe::run_cli(argc, argv, std::cout, std::cerr);
}
