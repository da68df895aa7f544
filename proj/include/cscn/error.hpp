#pragma once

#include <stdexcept>
#include <string>

namespace cscn {

// Base of every error raised by the library. Callers that do not care about
// the specific failure can catch this one type.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define CSCN_DEFINE_ERROR(Name)            \
    struct Name : Error {                  \
        using Error::Error;                \
    }

CSCN_DEFINE_ERROR(InvalidArgument);
CSCN_DEFINE_ERROR(InsufficientBands);
CSCN_DEFINE_ERROR(InfeasibleSpec);
CSCN_DEFINE_ERROR(HeaderMismatch);
CSCN_DEFINE_ERROR(UnsupportedDtype);
CSCN_DEFINE_ERROR(IoError);
CSCN_DEFINE_ERROR(EmptyClass);
CSCN_DEFINE_ERROR(ChannelMismatch);
CSCN_DEFINE_ERROR(SpatialMismatch);
CSCN_DEFINE_ERROR(TooSmall);
CSCN_DEFINE_ERROR(NoLabeledPixels);
CSCN_DEFINE_ERROR(EmptyRegion);
CSCN_DEFINE_ERROR(ShapeMismatch);
CSCN_DEFINE_ERROR(ConfigError);

#undef CSCN_DEFINE_ERROR

}  // namespace cscn
