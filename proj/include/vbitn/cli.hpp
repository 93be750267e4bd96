#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace vbitn {

/// Entry point of the `vbitn` binary. `args` excludes the program name.
/// Returns 0 on success, 2 on usage errors and 1 on runtime failures; every
/// failure writes exactly one line "error: <kind>: <message>" to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vbitn
