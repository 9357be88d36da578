#include <string>
#include <vector>

#include "fairrec/experiment.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return fairrec::cli_main(args);
}
