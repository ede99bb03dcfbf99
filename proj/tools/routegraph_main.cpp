#include "routegraph/cli.hpp"

int main(int argc, char** argv) {
    return routegraph::cli::main_entry(argc, argv);
}
