#pragma once

// Video ingestion: manifests describing a decoded video on disk, and
// sequential frame sources over them.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mprof/core.hpp"
#include "mprof/records.hpp"

namespace mprof {

struct Frame {
    int width = 0;
    int height = 0;
    int channels = 1;
    int index = 0;
    std::vector<std::uint8_t> data;  // row-major, interleaved channels

    std::span<const std::uint8_t> row(int r) const {
        const std::size_t stride = static_cast<std::size_t>(width) * channels;
        return {data.data() + stride * r, stride};
    }
    std::uint8_t at(int r, int c, int ch = 0) const {
        return data[(static_cast<std::size_t>(r) * width + c) * channels + ch];
    }
};

enum class SourceKind { FramesDir, RawFile };

struct VideoManifest {
    std::string id;
    SourceKind kind = SourceKind::RawFile;
    std::filesystem::path source;  // resolved against the manifest directory
    int width = 0;
    int height = 0;
    double fps = 30.0;
    int num_frames = 0;
    VanishingPoint vanishing_point;
    std::vector<ManeuverEvent> events;

    /// Throws InvalidManifest.
    void validate() const;
};

/// Relative source paths are resolved against `base_dir`.
VideoManifest manifest_from_json(const Json& j, const std::filesystem::path& base_dir = {});
Json manifest_to_json(const VideoManifest& m);
VideoManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const VideoManifest& m);

/// Single-consumer sequential stream of the frames of one video.
class FrameSource {
public:
    virtual ~FrameSource() = default;
    /// Next frame in order, or nullopt once num_frames frames were produced.
    virtual std::optional<Frame> next() = 0;
    virtual void rewind() = 0;
    virtual int size() const = 0;
};

/// Throws InvalidManifest, MissingFile, SizeMismatch. Image sources report
/// DimensionMismatch when a decoded frame disagrees with the manifest.
std::unique_ptr<FrameSource> open_source(const VideoManifest& manifest);

/// BT.601 luma, rounded to nearest.
Frame to_luma(const Frame& frame);

}  // namespace mprof
