#pragma once

#include <ostream>

namespace mqcsim {

// Entry point of the `mqcsim` command. Returns 0 on success, 1 on a runtime
// failure and 2 on a usage, configuration or schema error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mqcsim
