#pragma once

#include <string>
#include <vector>

namespace routegraph::cli {

struct CliResult {
    int exit_code = 0;
    std::string output; // stdout, JSON unless --pretty
    std::string error;  // stderr
};

// Exit codes: 0 ok, 2 usage, 3 malformed input, 4 validation failed,
// 5 payment rejected, 6 unresolvable, 7 other domain error, 1 unexpected.
CliResult run(const std::vector<std::string>& args);

int main_entry(int argc, char** argv);

} // namespace routegraph::cli
