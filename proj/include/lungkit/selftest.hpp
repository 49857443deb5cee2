#pragma once

#include <ostream>

namespace lungkit {

/// Built-in quick checks against hand-computed values and invariants.
/// Prints one line per check and a summary; returns the failure count.
int run_selftest(std::ostream& out);

}  // namespace lungkit
