#include "mprof/core.hpp"

#include <algorithm>
#include <string>

namespace mprof {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::InvalidEvent: return "InvalidEvent";
        case ErrorCode::UnknownClass: return "UnknownClass";
        case ErrorCode::InvalidManifest: return "InvalidManifest";
        case ErrorCode::MissingFile: return "MissingFile";
        case ErrorCode::SizeMismatch: return "SizeMismatch";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::BeltOutOfFrame: return "BeltOutOfFrame";
        case ErrorCode::WidthMismatch: return "WidthMismatch";
        case ErrorCode::EmptyProfile: return "EmptyProfile";
        case ErrorCode::Malformed: return "Malformed";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::OverlapUnrenderable: return "OverlapUnrenderable";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::EmptySplit: return "EmptySplit";
        case ErrorCode::CheckpointMismatch: return "CheckpointMismatch";
        case ErrorCode::VersionMismatch: return "VersionMismatch";
        case ErrorCode::Corrupt: return "Corrupt";
        case ErrorCode::ProfileTooSmall: return "ProfileTooSmall";
        case ErrorCode::MalformedInput: return "MalformedInput";
        case ErrorCode::UsageError: return "UsageError";
    }
    return "Unknown";
}

ManeuverClass class_from_code(int value) {
    if (value < 0 || value >= kNumClasses)
        throw Error(ErrorCode::UnknownClass, "class code out of range: " + std::to_string(value));
    return static_cast<ManeuverClass>(value);
}

std::string_view short_name(ManeuverClass c) {
    switch (c) {
        case ManeuverClass::LaneRight: return "LR";
        case ManeuverClass::LaneLeft: return "LL";
        case ManeuverClass::OvertakeRight: return "OR";
        case ManeuverClass::OvertakeLeft: return "OL";
    }
    return "??";
}

std::string_view long_name(ManeuverClass c) {
    switch (c) {
        case ManeuverClass::LaneRight: return "LaneRight";
        case ManeuverClass::LaneLeft: return "LaneLeft";
        case ManeuverClass::OvertakeRight: return "OvertakeRight";
        case ManeuverClass::OvertakeLeft: return "OvertakeLeft";
    }
    return "Unknown";
}

ManeuverClass parse_class(std::string_view name) {
    for (auto c : kAllClasses) {
        if (name == short_name(c) || name == long_name(c)) return c;
    }
    throw Error(ErrorCode::UnknownClass, "unknown maneuver class '" + std::string(name) + "'");
}

void ProfileDims::validate() const {
    if (width < 2 || height < 1 || (channels != 1 && channels != 3)) {
        throw Error(ErrorCode::InvalidArgument,
                    "invalid profile dims " + std::to_string(width) + "x" + std::to_string(height) +
                        "x" + std::to_string(channels));
    }
}

double iou(const DetectionBox& a, const DetectionBox& b) {
    const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
    const double ih = std::min(a.t_max, b.t_max) - std::max(a.t_min, b.t_min);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    const double inter = iw * ih;
    const double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

DetectionBox event_to_bbox(const ManeuverEvent& event, int v_x, const ProfileDims& dims) {
    if (event.t_start >= event.t_end)
        throw Error(ErrorCode::InvalidEvent, "empty maneuver interval [" +
                                                 std::to_string(event.t_start) + ", " +
                                                 std::to_string(event.t_end) + ")");
    if (event.t_start < 0 || event.t_end > dims.height)
        throw Error(ErrorCode::InvalidEvent, "maneuver interval outside the profile");
    if (v_x < 0 || v_x >= dims.width)
        throw Error(ErrorCode::InvalidArgument, "vanishing point column outside the profile");

    const double w = dims.width;
    DetectionBox box;
    box.cls = event.cls;
    box.t_min = event.t_start;
    box.t_max = event.t_end;
    box.score = 1.0;
    switch (event.cls) {
        case ManeuverClass::LaneLeft:
        case ManeuverClass::LaneRight:
            box.x_min = std::clamp(v_x - w / 4.0, 0.0, w);
            box.x_max = std::clamp(v_x + w / 4.0, 0.0, w);
            break;
        case ManeuverClass::OvertakeLeft:
            box.x_min = 0.0;
            box.x_max = v_x;
            break;
        case ManeuverClass::OvertakeRight:
            box.x_min = v_x;
            box.x_max = w;
            break;
    }
    if (!box.valid())
        throw Error(ErrorCode::InvalidEvent, "maneuver box collapses at v_x=" + std::to_string(v_x));
    return box;
}

DetectionBox mirror_box(const DetectionBox& box, int width) {
    DetectionBox m = box;
    m.cls = mirrored(box.cls);
    m.x_min = width - box.x_max;
    m.x_max = width - box.x_min;
    return m;
}

}  // namespace mprof
