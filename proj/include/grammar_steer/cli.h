#ifndef GRAMMAR_STEER_CLI_H_
#define GRAMMAR_STEER_CLI_H_

#include <ostream>

namespace grammar_steer {

/// Entry point of the `grammar-steer` tool. Results go to `out`, diagnostics to `err`.
/// Returns 0 on success, 1 on a domain error or a negative answer, 2 on a usage error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace grammar_steer

#endif  // GRAMMAR_STEER_CLI_H_
