/*
 * Command-line front end. run_cli is the whole program behind a thin main()
 * so the argument handling and exit codes can be unit-tested in-process.
 * Exit codes: 0 success, 1 runtime failure, 2 invalid configuration/usage.
 */
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace flsim {

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace flsim
