#pragma once

#include <ostream>

namespace ntssl {

/// Entry point of the `ntssl` tool. Returns the process exit code: 0 on
/// success, 2 usage/config error, 3 data/checkpoint mismatch, 4 numeric
/// failure. Errors are written to `err` as one line.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ntssl
