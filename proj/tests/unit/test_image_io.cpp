#include <doctest.h>

#include <fstream>
#include <random>

#include "mprof/error.hpp"
#include "mprof/image_io.hpp"
#include "test_util.hpp"

using namespace mprof;

namespace {

Image random_image(int w, int h, int c, unsigned seed) {
    Image img{w, h, c, {}};
    img.data.resize(static_cast<std::size_t>(w) * h * c);
    std::mt19937 rng(seed);
    for (auto& v : img.data) v = static_cast<std::uint8_t>(rng());
    return img;
}

ErrorCode error_of(const std::filesystem::path& p) {
    try {
        read_image(p);
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::UsageError;
}

void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
    std::ofstream(p, std::ios::binary) << bytes;
}

}  // namespace

TEST_CASE("netpbm and png round trips") {
    test::TempDir dir("img");
    for (int c : {1, 3}) {
        const Image img = random_image(17, 9, c, 3u + c);
        write_pnm(dir / "a.pnm", img);
        const Image p = read_image(dir / "a.pnm");
        CHECK(p.width == 17);
        CHECK(p.height == 9);
        CHECK(p.channels == c);
        CHECK(p.data == img.data);
        write_png(dir / "a.png", img);
        const Image q = read_image(dir / "a.png");
        CHECK(q.channels == c);
        CHECK(q.data == img.data);
    }
}

TEST_CASE("netpbm header comments are accepted") {
    test::TempDir dir("img");
    write_bytes(dir / "c.pgm", std::string("P5\n# made by hand\n2 1\n255\n") + "\x01\x02");
    const Image img = read_image(dir / "c.pgm");
    CHECK(img.width == 2);
    CHECK(img.data == std::vector<std::uint8_t>{1, 2});
}

TEST_CASE("broken images") {
    test::TempDir dir("img");
    CHECK(error_of(dir / "none.pgm") == ErrorCode::MissingFile);
    CHECK_THROWS_AS(read_png(dir / "none.png"), Error);
    write_bytes(dir / "trunc.pgm", std::string("P5\n4 4\n255\n") + "abc");
    CHECK(error_of(dir / "trunc.pgm") == ErrorCode::Malformed);
    write_bytes(dir / "trail.pgm", std::string("P5\n1 1\n255\n") + "ab");
    CHECK(error_of(dir / "trail.pgm") == ErrorCode::Malformed);
    write_bytes(dir / "maxval.pgm", std::string("P5\n1 1\n65535\n") + "ab");
    CHECK(error_of(dir / "maxval.pgm") == ErrorCode::Malformed);
    write_bytes(dir / "ascii.pgm", "P2\n1 1\n255\n7\n");
    CHECK(error_of(dir / "ascii.pgm") == ErrorCode::Malformed);
    write_bytes(dir / "junk.png", "\x89PNG\r\n\x1a\nnot really");
    CHECK(error_of(dir / "junk.png") == ErrorCode::Malformed);
}

TEST_CASE("supported extensions") {
    CHECK(is_supported_image("a.PGM"));
    CHECK(is_supported_image("a.png"));
    CHECK(is_supported_image("x/y.ppm"));
    CHECK_FALSE(is_supported_image("a.jpg"));
    CHECK_FALSE(is_supported_image("a"));
}
