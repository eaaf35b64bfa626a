#include "mprof/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "mprof/image_io.hpp"

namespace mprof {

namespace fs = std::filesystem;

void VideoManifest::validate() const {
    auto fail = [this](const std::string& what) {
        throw Error(ErrorCode::InvalidManifest, "manifest '" + id + "': " + what);
    };
    if (num_frames < 1) fail("num_frames must be >= 1");
    if (width < 2 || height < 1) fail("invalid frame dimensions");
    if (!(fps > 0.0)) fail("fps must be positive");
    if (vanishing_point.x < 0 || vanishing_point.x >= width || vanishing_point.y < 0 ||
        vanishing_point.y >= height)
        fail("vanishing point outside the frame");
    for (const auto& e : events) {
        if (e.t_start < 0 || e.t_start >= e.t_end || e.t_end > num_frames)
            fail("event outside [0, num_frames)");
    }
}

VideoManifest manifest_from_json(const Json& j, const fs::path& base_dir) {
    VideoManifest m;
    try {
        m.id = j.at("id").get<std::string>();
        if (j.contains("raw_file")) {
            m.kind = SourceKind::RawFile;
            m.source = j.at("raw_file").get<std::string>();
        } else if (j.contains("frames_dir")) {
            m.kind = SourceKind::FramesDir;
            m.source = j.at("frames_dir").get<std::string>();
        } else {
            throw Error(ErrorCode::InvalidManifest, "manifest needs 'raw_file' or 'frames_dir'");
        }
        if (m.source.is_relative() && !base_dir.empty()) m.source = base_dir / m.source;
        m.width = j.at("width").get<int>();
        m.height = j.at("height").get<int>();
        m.fps = j.value("fps", 30.0);
        m.num_frames = j.at("num_frames").get<int>();
        const auto& vp = j.at("vanishing_point");
        m.vanishing_point = {vp.at("x").get<double>(), vp.at("y").get<double>()};
        if (j.contains("events")) {
            for (const auto& e : j.at("events")) m.events.push_back(event_from_json(e));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidManifest, std::string("malformed manifest: ") + e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::InvalidManifest) throw;
        throw Error(ErrorCode::InvalidManifest, e.what());
    }
    m.validate();
    return m;
}

Json manifest_to_json(const VideoManifest& m) {
    Json j;
    j["id"] = m.id;
    j[m.kind == SourceKind::RawFile ? "raw_file" : "frames_dir"] = m.source.string();
    j["width"] = m.width;
    j["height"] = m.height;
    j["fps"] = m.fps;
    j["num_frames"] = m.num_frames;
    j["vanishing_point"] = {{"x", m.vanishing_point.x}, {"y", m.vanishing_point.y}};
    Json events = Json::array();
    for (const auto& e : m.events) events.push_back(event_to_json(e));
    j["events"] = events;
    return j;
}

VideoManifest load_manifest(const fs::path& path) {
    if (!fs::exists(path)) throw Error(ErrorCode::MissingFile, "manifest not found: " + path.string());
    Json j;
    try {
        j = read_json_file(path);
    } catch (const Error& e) {
        throw Error(ErrorCode::InvalidManifest, e.what());
    }
    return manifest_from_json(j, path.parent_path());
}

void save_manifest(const fs::path& path, const VideoManifest& m) {
    write_json_file(path, manifest_to_json(m));
}

namespace {

class RawFileSource final : public FrameSource {
public:
    explicit RawFileSource(const VideoManifest& m) : manifest_(m) {
        if (!fs::exists(m.source))
            throw Error(ErrorCode::MissingFile, "raw video not found: " + m.source.string());
        frame_bytes_ = static_cast<std::size_t>(m.width) * m.height;
        const auto expected = frame_bytes_ * static_cast<std::size_t>(m.num_frames);
        const auto actual = fs::file_size(m.source);
        if (actual != expected)
            throw Error(ErrorCode::SizeMismatch, m.source.string() + ": expected " +
                                                     std::to_string(expected) + " bytes, found " +
                                                     std::to_string(actual));
        in_.open(m.source, std::ios::binary);
        if (!in_) throw Error(ErrorCode::MissingFile, "cannot open " + m.source.string());
    }

    std::optional<Frame> next() override {
        if (cursor_ >= manifest_.num_frames) return std::nullopt;
        Frame f{manifest_.width, manifest_.height, 1, cursor_, std::vector<std::uint8_t>(frame_bytes_)};
        in_.read(reinterpret_cast<char*>(f.data.data()), static_cast<std::streamsize>(frame_bytes_));
        if (static_cast<std::size_t>(in_.gcount()) != frame_bytes_)
            throw Error(ErrorCode::SizeMismatch, "short read in " + manifest_.source.string());
        ++cursor_;
        return f;
    }

    void rewind() override {
        in_.clear();
        in_.seekg(0);
        cursor_ = 0;
    }

    int size() const override { return manifest_.num_frames; }

private:
    VideoManifest manifest_;
    std::ifstream in_;
    std::size_t frame_bytes_ = 0;
    int cursor_ = 0;
};

class FramesDirSource final : public FrameSource {
public:
    explicit FramesDirSource(const VideoManifest& m) : manifest_(m) {
        if (!fs::is_directory(m.source))
            throw Error(ErrorCode::MissingFile, "frames directory not found: " + m.source.string());
        for (const auto& entry : fs::directory_iterator(m.source)) {
            if (entry.is_regular_file() && is_supported_image(entry.path()))
                files_.push_back(entry.path());
        }
        std::sort(files_.begin(), files_.end());
        if (files_.size() < static_cast<std::size_t>(m.num_frames))
            throw Error(ErrorCode::MissingFile, m.source.string() + ": " +
                                                    std::to_string(files_.size()) + " images for " +
                                                    std::to_string(m.num_frames) + " frames");
        if (files_.size() > static_cast<std::size_t>(m.num_frames))
            throw Error(ErrorCode::SizeMismatch, m.source.string() + ": more images than num_frames");
    }

    std::optional<Frame> next() override {
        if (cursor_ >= manifest_.num_frames) return std::nullopt;
        Image img = read_image(files_[static_cast<std::size_t>(cursor_)]);
        if (img.width != manifest_.width || img.height != manifest_.height)
            throw Error(ErrorCode::DimensionMismatch,
                        files_[static_cast<std::size_t>(cursor_)].string() + " is " +
                            std::to_string(img.width) + "x" + std::to_string(img.height) +
                            ", manifest says " + std::to_string(manifest_.width) + "x" +
                            std::to_string(manifest_.height));
        if (channels_ == 0) channels_ = img.channels;
        if (img.channels != channels_)
            throw Error(ErrorCode::DimensionMismatch, "mixed channel counts in " + manifest_.source.string());
        Frame f{img.width, img.height, img.channels, cursor_, std::move(img.data)};
        ++cursor_;
        return f;
    }

    void rewind() override { cursor_ = 0; }
    int size() const override { return manifest_.num_frames; }

private:
    VideoManifest manifest_;
    std::vector<fs::path> files_;
    int cursor_ = 0;
    int channels_ = 0;
};

}  // namespace

std::unique_ptr<FrameSource> open_source(const VideoManifest& manifest) {
    manifest.validate();
    if (manifest.kind == SourceKind::RawFile) return std::make_unique<RawFileSource>(manifest);
    return std::make_unique<FramesDirSource>(manifest);
}

Frame to_luma(const Frame& frame) {
    if (frame.channels != 3)
        throw Error(ErrorCode::InvalidArgument, "to_luma expects a 3-channel frame");
    Frame out{frame.width, frame.height, 1, frame.index, {}};
    const std::size_t n = static_cast<std::size_t>(frame.width) * frame.height;
    out.data.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double y = 0.299 * frame.data[3 * i] + 0.587 * frame.data[3 * i + 1] +
                         0.114 * frame.data[3 * i + 2];
        out.data[i] = static_cast<std::uint8_t>(std::clamp(std::lround(y), 0L, 255L));
    }
    return out;
}

}  // namespace mprof
