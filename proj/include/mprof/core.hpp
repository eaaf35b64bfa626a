#pragma once

// Domain types shared by every stage of the pipeline.
//
// Coordinates: profile rows are time (row 0 = oldest frame), columns are the
// lateral image position. Boxes are half-open on both axes.

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mprof/error.hpp"

namespace mprof {

enum class ManeuverClass : int {
    LaneRight = 0,
    LaneLeft = 1,
    OvertakeRight = 2,
    OvertakeLeft = 3,
};

inline constexpr int kNumClasses = 4;
inline constexpr std::array<ManeuverClass, kNumClasses> kAllClasses{
    ManeuverClass::LaneRight, ManeuverClass::LaneLeft, ManeuverClass::OvertakeRight,
    ManeuverClass::OvertakeLeft};

constexpr int code(ManeuverClass c) { return static_cast<int>(c); }
ManeuverClass class_from_code(int code);

/// "LR", "LL", "OR", "OL".
std::string_view short_name(ManeuverClass c);
std::string_view long_name(ManeuverClass c);
/// Accepts the short form or the long enumerator name; throws UnknownClass.
ManeuverClass parse_class(std::string_view name);

constexpr bool is_lane_change(ManeuverClass c) {
    return c == ManeuverClass::LaneRight || c == ManeuverClass::LaneLeft;
}
constexpr bool is_left(ManeuverClass c) {
    return c == ManeuverClass::LaneLeft || c == ManeuverClass::OvertakeLeft;
}
/// Left/right counterpart of a class (LL <-> LR, OL <-> OR).
constexpr ManeuverClass mirrored(ManeuverClass c) {
    switch (c) {
        case ManeuverClass::LaneRight: return ManeuverClass::LaneLeft;
        case ManeuverClass::LaneLeft: return ManeuverClass::LaneRight;
        case ManeuverClass::OvertakeRight: return ManeuverClass::OvertakeLeft;
        case ManeuverClass::OvertakeLeft: return ManeuverClass::OvertakeRight;
    }
    return c;
}

struct ProfileDims {
    int width = 0;     // columns, lateral axis
    int height = 0;    // rows, time axis
    int channels = 1;  // 1 or 3

    void validate() const;
    std::size_t sample_count() const {
        return static_cast<std::size_t>(width) * height * channels;
    }
    bool operator==(const ProfileDims&) const = default;
};

struct VanishingPoint {
    double x = 0.0;
    double y = 0.0;
    bool operator==(const VanishingPoint&) const = default;
};

struct ManeuverEvent {
    ManeuverClass cls = ManeuverClass::LaneRight;
    int t_start = 0;  // inclusive frame index
    int t_end = 0;    // exclusive frame index

    bool operator==(const ManeuverEvent&) const = default;
};

struct DetectionBox {
    ManeuverClass cls = ManeuverClass::LaneRight;
    double x_min = 0.0;
    double t_min = 0.0;
    double x_max = 0.0;
    double t_max = 0.0;
    double score = 1.0;

    double width() const { return x_max - x_min; }
    double height() const { return t_max - t_min; }
    double area() const { return width() * height(); }
    bool valid() const { return x_min < x_max && t_min < t_max; }

    bool operator==(const DetectionBox&) const = default;
};

/// Intersection over union of two axis-aligned boxes; class is ignored.
double iou(const DetectionBox& a, const DetectionBox& b);

/// Converts a labeled maneuver into its box in the profile:
///  - lane changes: width W/2 centered on v_x, clamped to [0, W];
///  - overtakes: from the image edge on the class side up to v_x.
/// The time span is copied from the event and the score is 1.
/// Throws InvalidEvent for empty or out-of-range events.
DetectionBox event_to_bbox(const ManeuverEvent& event, int v_x, const ProfileDims& dims);

/// Horizontal mirror inside a profile of the given width; swaps left/right classes.
DetectionBox mirror_box(const DetectionBox& box, int width);

}  // namespace mprof
