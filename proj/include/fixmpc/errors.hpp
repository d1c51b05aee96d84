#pragma once

#include <stdexcept>
#include <string>

namespace fixmpc {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define FIXMPC_DEFINE_ERROR(Name)          \
    class Name : public Error {            \
    public:                                \
        using Error::Error;                \
    }

FIXMPC_DEFINE_ERROR(RangeError);
FIXMPC_DEFINE_ERROR(OverflowError);
FIXMPC_DEFINE_ERROR(FormatError);
FIXMPC_DEFINE_ERROR(DimensionError);
FIXMPC_DEFINE_ERROR(ValidationError);
FIXMPC_DEFINE_ERROR(NotCondensableError);
FIXMPC_DEFINE_ERROR(PrecisionError);
FIXMPC_DEFINE_ERROR(SingularKktError);
FIXMPC_DEFINE_ERROR(AssumptionError);
FIXMPC_DEFINE_ERROR(LayoutError);
FIXMPC_DEFINE_ERROR(UnstableSystemError);
FIXMPC_DEFINE_ERROR(OracleFailure);
FIXMPC_DEFINE_ERROR(ConfigError);

#undef FIXMPC_DEFINE_ERROR

} // namespace fixmpc
