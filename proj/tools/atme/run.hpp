#pragma once

namespace atme::cli {

/// Parses argv and executes one subcommand. Exit codes: 0 success,
/// 1 usage error, 2 data/validation error, 3 numerical failure.
int run(int argc, char** argv);

}  // namespace atme::cli
