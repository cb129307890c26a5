#pragma once

#include <iosfwd>

namespace gwe {

// Oracle and closed-form self-test; prints one PASS/FAIL line per check, returns the failure count.
int run_self_check(std::ostream& os);

}  // namespace gwe
