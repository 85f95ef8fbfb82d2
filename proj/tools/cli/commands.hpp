// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <span>
#include <string>

namespace wogma::cli {

/// Exit codes: 0 success, 1 configuration or usage error, 2 data error,
/// 3 numeric failure such as a non-finite loss.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

struct Streams {
  std::istream& in;
  std::ostream& out;
  std::ostream& err;
};

/// Runs one subcommand. `args` excludes the program name. Errors are reported
/// on `io.err` and mapped to the exit codes above.
int dispatch(std::span<const std::string> args, const Streams& io);

}  // namespace wogma::cli
