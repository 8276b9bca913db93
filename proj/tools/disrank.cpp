#include "disrank/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return disrank::cli::run(argc, argv, std::cout, std::cerr);
}
