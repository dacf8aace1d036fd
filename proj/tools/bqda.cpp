#include <iostream>

#include "bqda/cli/commands.hpp"

int main(int argc, char** argv) {
    return bqda::cli::run(argc, argv, std::cout, std::cerr);
}
