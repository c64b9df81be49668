#pragma once

#include <stdexcept>
#include <string>

namespace tlnet {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define TLNET_DEFINE_ERROR(Name)                       \
    struct Name : Error {                              \
        using Error::Error;                            \
    }

TLNET_DEFINE_ERROR(NonPositiveDepth);
TLNET_DEFINE_ERROR(MissingMatrix);
TLNET_DEFINE_ERROR(MalformedMatrix);
TLNET_DEFINE_ERROR(DegenerateRig);
TLNET_DEFINE_ERROR(BehindCamera);
TLNET_DEFINE_ERROR(ShapeMismatch);
TLNET_DEFINE_ERROR(DegenerateRoi);
TLNET_DEFINE_ERROR(EmptyClass);
TLNET_DEFINE_ERROR(FieldCount);
TLNET_DEFINE_ERROR(NonNumeric);
TLNET_DEFINE_ERROR(MissingFile);
TLNET_DEFINE_ERROR(IdMismatch);
TLNET_DEFINE_ERROR(PlacementFailure);
TLNET_DEFINE_ERROR(DatasetEmpty);
TLNET_DEFINE_ERROR(NoPotentialAnchors);
TLNET_DEFINE_ERROR(CheckpointVersionMismatch);

#undef TLNET_DEFINE_ERROR

}  // namespace tlnet
