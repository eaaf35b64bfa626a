#include "mprof/profile.hpp"

#include <algorithm>
#include <charconv>

#include "mprof/image_io.hpp"

namespace mprof {

namespace fs = std::filesystem;

BeltOffsets parse_belt(std::string_view text) {
    if (text == "far") return kFarBelt;
    if (text == "medium") return kMediumBelt;
    if (text == "close") return kCloseBelt;
    const auto colon = text.find(':');
    BeltOffsets b{};
    if (colon != std::string_view::npos) {
        auto lo = std::from_chars(text.data(), text.data() + colon, b.lo);
        auto hi = std::from_chars(text.data() + colon + 1, text.data() + text.size(), b.hi);
        if (lo.ec == std::errc{} && lo.ptr == text.data() + colon && hi.ec == std::errc{} &&
            hi.ptr == text.data() + text.size() && b.lo >= 0 && b.lo < b.hi)
            return b;
    }
    throw Error(ErrorCode::InvalidArgument, "bad belt spec '" + std::string(text) +
                                                "' (expected far|medium|close|lo:hi)");
}

std::string format_belt(const BeltOffsets& belt) {
    return std::to_string(belt.lo) + ":" + std::to_string(belt.hi);
}

PixelBelt belt_rows(int v_y, const BeltOffsets& offsets, int frame_height) {
    if (offsets.lo >= offsets.hi || offsets.lo < 0)
        throw Error(ErrorCode::InvalidArgument, "belt offsets must satisfy 0 <= lo < hi");
    if (v_y < 0 || v_y >= frame_height)
        throw Error(ErrorCode::InvalidArgument, "horizon row outside the frame");
    PixelBelt belt{v_y + offsets.lo, std::min(v_y + offsets.hi, frame_height)};
    if (belt.row_start >= frame_height)
        throw Error(ErrorCode::BeltOutOfFrame,
                    "belt [" + std::to_string(v_y + offsets.lo) + ", " +
                        std::to_string(v_y + offsets.hi) + ") starts below the frame (height " +
                        std::to_string(frame_height) + ")");
    return belt;
}

void extract_strip(const Frame& frame, const PixelBelt& belt, std::span<std::uint8_t> out) {
    const std::size_t stride = static_cast<std::size_t>(frame.width) * frame.channels;
    if (belt.row_start < 0 || belt.row_end > frame.height || belt.height() < 1)
        throw Error(ErrorCode::InvalidArgument, "belt outside the frame");
    if (out.size() != stride) throw Error(ErrorCode::WidthMismatch, "strip buffer has wrong width");

    std::vector<std::uint32_t> acc(stride, 0);
    for (int r = belt.row_start; r < belt.row_end; ++r) {
        const std::uint8_t* src = frame.data.data() + stride * static_cast<std::size_t>(r);
        for (std::size_t i = 0; i < stride; ++i) acc[i] += src[i];
    }
    // round half up: floor((2 * sum + h) / (2 * h))
    const std::uint32_t h = static_cast<std::uint32_t>(belt.height());
    for (std::size_t i = 0; i < stride; ++i)
        out[i] = static_cast<std::uint8_t>((2 * acc[i] + h) / (2 * h));
}

std::vector<std::uint8_t> extract_strip(const Frame& frame, const PixelBelt& belt) {
    std::vector<std::uint8_t> out(static_cast<std::size_t>(frame.width) * frame.channels);
    extract_strip(frame, belt, out);
    return out;
}

ProfileBuilder::ProfileBuilder(ProfileProvenance provenance) : provenance_(std::move(provenance)) {}

void ProfileBuilder::push_strip(std::span<const std::uint8_t> strip, int channels) {
    if (channels != 1 && channels != 3)
        throw Error(ErrorCode::InvalidArgument, "strip channels must be 1 or 3");
    if (strip.size() % static_cast<std::size_t>(channels) != 0)
        throw Error(ErrorCode::WidthMismatch, "strip length is not a multiple of the channel count");
    const int width = static_cast<int>(strip.size()) / channels;
    if (rows_ == 0) {
        if (width < 2) throw Error(ErrorCode::WidthMismatch, "strip narrower than 2 columns");
        width_ = width;
        channels_ = channels;
    } else if (width != width_ || channels != channels_) {
        throw Error(ErrorCode::WidthMismatch, "strip of width " + std::to_string(width) +
                                                  " pushed into a profile of width " +
                                                  std::to_string(width_));
    }
    samples_.insert(samples_.end(), strip.begin(), strip.end());
    ++rows_;
}

MotionProfile ProfileBuilder::finalize() const {
    if (rows_ == 0) throw Error(ErrorCode::EmptyProfile, "no strips were pushed");
    MotionProfile p;
    p.dims = {width_, rows_, channels_};
    p.samples = samples_;
    p.provenance = provenance_;
    return p;
}

MotionProfile build_profile(FrameSource& source, const VideoManifest& manifest,
                            const BeltOffsets& belt_offsets, int channels) {
    ProfileProvenance prov;
    prov.video_id = manifest.id;
    prov.belt = belt_offsets;
    prov.v_x = std::clamp(static_cast<int>(manifest.vanishing_point.x), 0, manifest.width - 1);
    prov.fps = manifest.fps;
    prov.events = manifest.events;

    const PixelBelt belt =
        belt_rows(static_cast<int>(manifest.vanishing_point.y), belt_offsets, manifest.height);
    ProfileBuilder builder(prov);
    std::vector<std::uint8_t> strip;
    while (auto frame = source.next()) {
        if (frame->channels != channels) {
            if (channels == 1 && frame->channels == 3) {
                frame = to_luma(*frame);
            } else {
                throw Error(ErrorCode::DimensionMismatch,
                            "cannot build a color profile from grayscale frames");
            }
        }
        strip.resize(static_cast<std::size_t>(frame->width) * frame->channels);
        extract_strip(*frame, belt, strip);
        builder.push_strip(strip, frame->channels);
    }
    return builder.finalize();
}

fs::path sidecar_path(const fs::path& profile_path) {
    auto p = profile_path;
    p.replace_extension(".meta.json");
    return p;
}

Json provenance_to_json(const MotionProfile& p) {
    Json j;
    j["video_id"] = p.provenance.video_id;
    j["belt"] = {p.provenance.belt.lo, p.provenance.belt.hi};
    j["v_x"] = p.provenance.v_x;
    j["fps"] = p.provenance.fps;
    j["width"] = p.dims.width;
    j["height"] = p.dims.height;
    j["channels"] = p.dims.channels;
    Json events = Json::array();
    for (const auto& e : p.provenance.events) events.push_back(event_to_json(e));
    j["events"] = events;
    return j;
}

void export_profile(const MotionProfile& profile, const fs::path& path) {
    profile.dims.validate();
    if (profile.samples.size() != profile.dims.sample_count())
        throw Error(ErrorCode::InvalidArgument, "profile sample buffer does not match its dims");
    Image img{profile.dims.width, profile.dims.height, profile.dims.channels, profile.samples};
    write_pnm(path, img);
    write_json_file(sidecar_path(path), provenance_to_json(profile));
}

MotionProfile import_profile(const fs::path& path) {
    if (!fs::exists(path)) throw Error(ErrorCode::MissingFile, "profile not found: " + path.string());
    const auto meta_path = sidecar_path(path);
    if (!fs::exists(meta_path))
        throw Error(ErrorCode::MissingFile, "profile sidecar not found: " + meta_path.string());

    Image img = read_pnm(path);
    MotionProfile p;
    p.dims = {img.width, img.height, img.channels};
    p.samples = std::move(img.data);
    const Json meta = read_json_file(meta_path);
    try {
        p.provenance.video_id = meta.at("video_id").get<std::string>();
        p.provenance.belt = {meta.at("belt").at(0).get<int>(), meta.at("belt").at(1).get<int>()};
        p.provenance.v_x = meta.at("v_x").get<int>();
        p.provenance.fps = meta.at("fps").get<double>();
        if (meta.contains("events")) {
            for (const auto& e : meta.at("events")) p.provenance.events.push_back(event_from_json(e));
        }
        if (meta.at("width").get<int>() != p.dims.width ||
            meta.at("height").get<int>() != p.dims.height ||
            meta.at("channels").get<int>() != p.dims.channels)
            throw Error(ErrorCode::Malformed, "sidecar dims disagree with raster " + path.string());
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Malformed, meta_path.string() + ": " + e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::Malformed) throw;
        throw Error(ErrorCode::Malformed, meta_path.string() + ": " + e.what());
    }
    p.dims.validate();
    return p;
}

MotionProfile mirror_profile(const MotionProfile& profile) {
    MotionProfile m = profile;
    const int w = profile.dims.width;
    const int c = profile.dims.channels;
    for (int t = 0; t < profile.dims.height; ++t)
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < c; ++ch) m.at(t, w - 1 - x, ch) = profile.at(t, x, ch);
    m.provenance.v_x = std::clamp(w - profile.provenance.v_x, 0, w - 1);
    for (auto& e : m.provenance.events) e.cls = mirrored(e.cls);
    return m;
}

}  // namespace mprof
