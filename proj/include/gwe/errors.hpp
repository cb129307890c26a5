#pragma once

#include <stdexcept>
#include <string>

namespace gwe {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define GWE_ERROR(name)                      \
    struct name : Error {                    \
        using Error::Error;                  \
    }

GWE_ERROR(BudgetExceeded);
GWE_ERROR(ImpossibleHeight);
GWE_ERROR(IncompleteExpansion);
GWE_ERROR(InfiniteTree);
GWE_ERROR(NonConvergence);
GWE_ERROR(NotSubcritical);
GWE_ERROR(Singular);
GWE_ERROR(ExplosionGuard);
GWE_ERROR(InsufficientData);
GWE_ERROR(InsufficientLevels);
GWE_ERROR(CensoringTooHigh);
GWE_ERROR(DegenerateBins);
GWE_ERROR(DomainError);
GWE_ERROR(ConfigError);
GWE_ERROR(IoError);

#undef GWE_ERROR

}  // namespace gwe
