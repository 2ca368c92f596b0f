#pragma once

namespace nlca::cli {

// Parses argv, runs the selected subcommand, and returns the process exit
// code: 0 for success (a failed stability report is still a report), 2 for
// configuration errors, 3 for I/O errors, 4 for numerical failures.
int run(int argc, const char* const* argv);

}  // namespace nlca::cli
