#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mprof {

enum class ErrorCode {
    InvalidArgument,
    InvalidEvent,
    UnknownClass,
    InvalidManifest,
    MissingFile,
    SizeMismatch,
    DimensionMismatch,
    BeltOutOfFrame,
    WidthMismatch,
    EmptyProfile,
    Malformed,
    IoError,
    OverlapUnrenderable,
    ShapeMismatch,
    EmptySplit,
    CheckpointMismatch,
    VersionMismatch,
    Corrupt,
    ProfileTooSmall,
    MalformedInput,
    UsageError,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries a stable machine-readable code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace mprof
