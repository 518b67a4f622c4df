#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace goalnet::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitUsage = 2,
    kExitValidation = 3,
    kExitConfig = 4,
    kExitInput = 5, // parse and format errors
    kExitDeadlock = 6,
};

int exit_code_for(const std::string& error_kind);

// Entry point of the `goalnet` tool. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Writes through a temporary sibling file and renames it into place.
void write_file_atomic(const std::filesystem::path& p, const std::string& data);

std::string version();

} // namespace goalnet::cli
