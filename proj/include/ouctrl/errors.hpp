#pragma once

#include <stdexcept>
#include <string>

namespace ouctrl {

// Base for all toolkit errors; experiments catch this to wrap scenario context.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define OUCTRL_DEFINE_ERROR(Name)                        \
    class Name : public Error {                          \
    public:                                              \
        using Error::Error;                              \
    }

OUCTRL_DEFINE_ERROR(FlowOverflow);
OUCTRL_DEFINE_ERROR(QuadratureFailure);
OUCTRL_DEFINE_ERROR(DerivOrderUnavailable);
OUCTRL_DEFINE_ERROR(EllipticityFailure);
OUCTRL_DEFINE_ERROR(GridMismatch);
OUCTRL_DEFINE_ERROR(NonMonotoneScenario);
OUCTRL_DEFINE_ERROR(CgStall);
OUCTRL_DEFINE_ERROR(IndefiniteForm);
OUCTRL_DEFINE_ERROR(PartitionOverflow);
OUCTRL_DEFINE_ERROR(ConfigError);

#undef OUCTRL_DEFINE_ERROR

} // namespace ouctrl
