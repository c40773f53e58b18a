#include <iostream>

#include "emtp2_cli/commands.hpp"

int main(int argc, char** argv) {
    return emtp2::cli::run(argc, argv, std::cout, std::cerr);
}
