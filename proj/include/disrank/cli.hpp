#pragma once

#include <iosfwd>

namespace disrank::cli {

/// Entry point for the `disrank` executable:
///   compute-labels | train | predict | evaluate
/// Data goes to files or `out`; diagnostics go to `err`. Returns the
/// process exit code (0 on success).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace disrank::cli
