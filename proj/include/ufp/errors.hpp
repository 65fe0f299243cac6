#pragma once

#include <stdexcept>
#include <string>

namespace ufp {

// Base class for every error thrown by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define UFP_DEFINE_ERROR(Name)                                  \
    class Name : public Error {                                 \
    public:                                                     \
        explicit Name(const std::string& what) : Error(what) {} \
    }

UFP_DEFINE_ERROR(InvalidShape);
UFP_DEFINE_ERROR(ShapeMismatch);
UFP_DEFINE_ERROR(InvalidConfig);
UFP_DEFINE_ERROR(InvalidState);
UFP_DEFINE_ERROR(InvalidSpec);
UFP_DEFINE_ERROR(InvalidSnapshot);
UFP_DEFINE_ERROR(InvalidModel);
UFP_DEFINE_ERROR(InvalidFingerprint);
UFP_DEFINE_ERROR(UninitializedModel);
UFP_DEFINE_ERROR(EmptyDataset);
UFP_DEFINE_ERROR(EmptyBatch);
UFP_DEFINE_ERROR(TrainingDiverged);
UFP_DEFINE_ERROR(InsufficientCalibration);
UFP_DEFINE_ERROR(IncompleteCampaign);
UFP_DEFINE_ERROR(FormatError);
UFP_DEFINE_ERROR(UnsupportedVersion);
UFP_DEFINE_ERROR(CorruptCheckpoint);
UFP_DEFINE_ERROR(WriteError);

#undef UFP_DEFINE_ERROR

} // namespace ufp
