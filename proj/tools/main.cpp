#include <iostream>

#include "cli_driver.hpp"

int main(int argc, char** argv) {
    return plateopt::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
