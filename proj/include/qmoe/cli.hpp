#pragma once

#include <iosfwd>

namespace qmoe {

/// Exit codes: 0 success, 1 structured error, 2 usage error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace qmoe
