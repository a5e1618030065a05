// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ipesr {

// Structured exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitRuntime = 3;

// Runs the command line `args` (args[0] is the program name). Never throws.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// The oracle self-check. With `inject_sinc_fault` the sinc switch threshold
// is corrupted first, which the quadrature check must catch.
int run_selfcheck(std::ostream& out, bool inject_sinc_fault);

}  // namespace ipesr
