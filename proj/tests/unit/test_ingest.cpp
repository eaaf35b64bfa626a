#include <doctest.h>

#include <fstream>

#include "mprof/error.hpp"
#include "mprof/image_io.hpp"
#include "mprof/ingest.hpp"
#include "test_util.hpp"

using namespace mprof;

namespace {

VideoManifest raw_manifest(const std::filesystem::path& src, int w, int h, int n) {
    VideoManifest m;
    m.id = "v";
    m.kind = SourceKind::RawFile;
    m.source = src;
    m.width = w;
    m.height = h;
    m.num_frames = n;
    m.vanishing_point = {w / 2.0, h / 2.0};
    return m;
}

void write_raw(const std::filesystem::path& p, std::size_t bytes) {
    std::ofstream out(p, std::ios::binary);
    for (std::size_t i = 0; i < bytes; ++i) out.put(static_cast<char>(i % 251));
}

ErrorCode open_error(const VideoManifest& m) {
    try {
        auto src = open_source(m);
        while (src->next()) {
        }
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::UsageError;
}

}  // namespace

TEST_CASE("manifest json round trip resolves relative sources") {
    test::TempDir dir("ing");
    VideoManifest m = raw_manifest("clip.raw", 8, 4, 3);
    m.events.push_back({ManeuverClass::OvertakeLeft, 0, 2});
    save_manifest(dir / "m.json", m);
    const VideoManifest back = load_manifest(dir / "m.json");
    CHECK(back.id == "v");
    CHECK(back.source == dir.path() / "clip.raw");
    CHECK(back.width == 8);
    CHECK(back.num_frames == 3);
    CHECK(back.vanishing_point == m.vanishing_point);
    REQUIRE(back.events.size() == 1);
    CHECK(back.events[0].cls == ManeuverClass::OvertakeLeft);
}

TEST_CASE("manifest validation") {
    auto code = [](const Json& j) {
        try {
            manifest_from_json(j);
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::UsageError;
    };
    const Json good = {{"id", "a"},         {"raw_file", "/x"}, {"width", 8},
                       {"height", 4},       {"num_frames", 2},  {"vanishing_point", {{"x", 4}, {"y", 1}}}};
    CHECK_NOTHROW(manifest_from_json(good));
    Json j = good;
    j.erase("raw_file");
    CHECK(code(j) == ErrorCode::InvalidManifest);
    j = good;
    j["num_frames"] = 0;
    CHECK(code(j) == ErrorCode::InvalidManifest);
    j = good;
    j["vanishing_point"]["x"] = 8;
    CHECK(code(j) == ErrorCode::InvalidManifest);
    j = good;
    j["width"] = "wide";
    CHECK(code(j) == ErrorCode::InvalidManifest);
    j = good;
    j["events"] = Json::array({{{"video_id", "a"}, {"class", "LL"}, {"t_start", 1}, {"t_end", 3}}});
    CHECK(code(j) == ErrorCode::InvalidManifest);
    test::TempDir dir("ing");
    CHECK_THROWS_AS(load_manifest(dir / "absent.json"), Error);
}

TEST_CASE("raw file source streams frames in order and rewinds") {
    test::TempDir dir("ing");
    write_raw(dir / "clip.raw", 6 * 2 * 3);
    auto src = open_source(raw_manifest(dir / "clip.raw", 6, 2, 3));
    CHECK(src->size() == 3);
    for (int k = 0; k < 3; ++k) {
        auto f = src->next();
        REQUIRE(f);
        CHECK(f->index == k);
        CHECK(f->channels == 1);
        CHECK(f->at(1, 5) == static_cast<std::uint8_t>((k * 12 + 11) % 251));
    }
    CHECK_FALSE(src->next());
    src->rewind();
    auto f = src->next();
    REQUIRE(f);
    CHECK(f->index == 0);
    CHECK(f->at(0, 0) == 0);
}

TEST_CASE("raw file source errors") {
    test::TempDir dir("ing");
    CHECK(open_error(raw_manifest(dir / "none.raw", 6, 2, 3)) == ErrorCode::MissingFile);
    write_raw(dir / "short.raw", 6 * 2 * 3 - 1);
    CHECK(open_error(raw_manifest(dir / "short.raw", 6, 2, 3)) == ErrorCode::SizeMismatch);
    write_raw(dir / "long.raw", 6 * 2 * 3 + 1);
    CHECK(open_error(raw_manifest(dir / "long.raw", 6, 2, 3)) == ErrorCode::SizeMismatch);
}

TEST_CASE("frames directory source") {
    test::TempDir dir("ing");
    std::filesystem::create_directories(dir / "frames");
    for (int k = 0; k < 3; ++k) {
        Image img{4, 2, 3, std::vector<std::uint8_t>(24, static_cast<std::uint8_t>(10 * k))};
        write_png(dir / ("frames/f" + std::to_string(k) + ".png"), img);
    }
    VideoManifest m = raw_manifest(dir / "frames", 4, 2, 3);
    m.kind = SourceKind::FramesDir;
    auto src = open_source(m);
    for (int k = 0; k < 3; ++k) {
        auto f = src->next();
        REQUIRE(f);
        CHECK(f->channels == 3);
        CHECK(f->at(1, 3, 2) == 10 * k);
    }
    CHECK_FALSE(src->next());

    m.num_frames = 4;
    CHECK(open_error(m) == ErrorCode::MissingFile);
    m.num_frames = 2;
    CHECK(open_error(m) == ErrorCode::SizeMismatch);
    m.num_frames = 3;
    m.width = 5;
    m.vanishing_point = {2, 1};
    CHECK(open_error(m) == ErrorCode::DimensionMismatch);
    m.source = dir / "nowhere";
    CHECK(open_error(m) == ErrorCode::MissingFile);
}

TEST_CASE("luma conversion") {
    Frame f{2, 1, 3, 0, {255, 0, 0, 10, 200, 30}};
    const Frame y = to_luma(f);
    CHECK(y.channels == 1);
    CHECK(y.data[0] == 76);   // 0.299 * 255 = 76.245
    CHECK(y.data[1] == 124);  // 2.99 + 117.4 + 3.42 = 123.81
    Frame gray{1, 1, 1, 0, {5}};
    CHECK_THROWS_AS(to_luma(gray), Error);
}
