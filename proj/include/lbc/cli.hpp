#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lbc::cli {

enum ExitCode : int { ok = 0, domain_error = 1, usage_error = 2 };

/// Runs one verb. `args` excludes the program name.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace lbc::cli
