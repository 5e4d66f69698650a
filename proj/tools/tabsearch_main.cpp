#include <iostream>
#include <string>
#include <vector>

#include "tabsearch/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return tabsearch::cli::run(args, std::cout, std::cerr);
}
