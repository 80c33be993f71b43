#pragma once

#include <iosfwd>

namespace logcave {

// Exit codes: 0 success, 1 input/config error, 2 solver non-convergence.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace logcave
