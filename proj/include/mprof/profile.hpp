#pragma once

// Motion profiles: one vertically averaged belt strip per frame, stacked in
// time order into a T x W (x C) raster.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mprof/core.hpp"
#include "mprof/ingest.hpp"

namespace mprof {

/// Offset range [lo, hi) in rows below the horizon.
struct BeltOffsets {
    int lo = 35;
    int hi = 100;
    bool operator==(const BeltOffsets&) const = default;
};

inline constexpr BeltOffsets kFarBelt{0, 35};
inline constexpr BeltOffsets kMediumBelt{35, 100};
inline constexpr BeltOffsets kCloseBelt{100, 200};

/// "far", "medium", "close" or "lo:hi".
BeltOffsets parse_belt(std::string_view text);
std::string format_belt(const BeltOffsets& belt);

struct PixelBelt {
    int row_start = 0;
    int row_end = 0;
    int height() const { return row_end - row_start; }
};

/// Rows [v_y + lo, v_y + hi) clamped to the frame. Throws BeltOutOfFrame when
/// nothing is left after clamping.
PixelBelt belt_rows(int v_y, const BeltOffsets& offsets, int frame_height);

/// Per column and channel: mean of the belt rows, rounded half up.
void extract_strip(const Frame& frame, const PixelBelt& belt, std::span<std::uint8_t> out);
std::vector<std::uint8_t> extract_strip(const Frame& frame, const PixelBelt& belt);

struct ProfileProvenance {
    std::string video_id;
    BeltOffsets belt = kMediumBelt;
    int v_x = 0;
    double fps = 30.0;
    /// Labels travelling with the profile (empty when unlabeled).
    std::vector<ManeuverEvent> events;

    bool operator==(const ProfileProvenance&) const = default;
};

struct MotionProfile {
    ProfileDims dims;
    std::vector<std::uint8_t> samples;  // T x W x C, row-major
    ProfileProvenance provenance;

    std::uint8_t at(int t, int x, int c = 0) const {
        return samples[(static_cast<std::size_t>(t) * dims.width + x) * dims.channels + c];
    }
    std::uint8_t& at(int t, int x, int c = 0) {
        return samples[(static_cast<std::size_t>(t) * dims.width + x) * dims.channels + c];
    }
    std::span<const std::uint8_t> row(int t) const {
        const std::size_t stride = static_cast<std::size_t>(dims.width) * dims.channels;
        return {samples.data() + stride * t, stride};
    }

    bool operator==(const MotionProfile&) const = default;
};

/// Streaming accumulator: push one strip per frame, in frame order.
class ProfileBuilder {
public:
    explicit ProfileBuilder(ProfileProvenance provenance = {});

    /// Throws WidthMismatch when the strip geometry differs from the first one.
    void push_strip(std::span<const std::uint8_t> strip, int channels = 1);
    int rows() const { return rows_; }
    /// Throws EmptyProfile when no strip was pushed.
    MotionProfile finalize() const;

private:
    ProfileProvenance provenance_;
    int width_ = 0;
    int channels_ = 0;
    int rows_ = 0;
    std::vector<std::uint8_t> samples_;
};

/// Streams every frame of the source through the belt and builder.
/// channels = 1 converts color frames to luma; channels = 3 requires color input.
MotionProfile build_profile(FrameSource& source, const VideoManifest& manifest,
                            const BeltOffsets& belt = kMediumBelt, int channels = 1);

/// `<dir>/<stem>.meta.json` for a profile file path.
std::filesystem::path sidecar_path(const std::filesystem::path& profile_path);

Json provenance_to_json(const MotionProfile& p);

/// Binary PGM/PPM raster plus the JSON sidecar.
void export_profile(const MotionProfile& profile, const std::filesystem::path& path);
/// Throws MissingFile, Malformed.
MotionProfile import_profile(const std::filesystem::path& path);

/// Column-mirrored copy (x -> W-1-x) with mirrored labels and v_x -> W - v_x.
MotionProfile mirror_profile(const MotionProfile& profile);

}  // namespace mprof
