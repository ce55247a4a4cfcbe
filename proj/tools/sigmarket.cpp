#include <iostream>
#include <string>
#include <vector>

#include "sigmarket/pipeline.hpp"

int main(int argc, char** argv) {
    return sigmarket::run_cli(std::vector<std::string>(argv, argv + argc), std::cerr);
}
