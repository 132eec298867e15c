#pragma once

#include <iosfwd>

namespace nctj::harness {

// Subcommands: run, metrics, etf, eval, report. Exit codes: 0 success,
// 1 usage/validation error, 2 runtime failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace nctj::harness
