#include "mprof/image_io.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <string>

#include <png.h>

#include "mprof/error.hpp"

namespace mprof {

namespace {

// Skips whitespace and '#' comments between Netpbm header tokens.
int read_header_int(std::istream& in, const std::filesystem::path& path) {
    int ch = in.get();
    while (ch != EOF) {
        if (ch == '#') {
            while (ch != EOF && ch != '\n') ch = in.get();
        } else if (std::isspace(ch)) {
            ch = in.get();
        } else {
            break;
        }
    }
    if (ch == EOF || !std::isdigit(ch))
        throw Error(ErrorCode::Malformed, "bad Netpbm header in " + path.string());
    long value = 0;
    while (ch != EOF && std::isdigit(ch)) {
        value = value * 10 + (ch - '0');
        if (value > (1L << 24)) throw Error(ErrorCode::Malformed, "Netpbm value too large");
        ch = in.get();
    }
    // exactly one whitespace byte terminates the last header field
    if (ch == EOF || !std::isspace(ch))
        throw Error(ErrorCode::Malformed, "bad Netpbm header in " + path.string());
    return static_cast<int>(value);
}

}  // namespace

bool is_supported_image(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".pgm" || ext == ".ppm" || ext == ".pnm" || ext == ".png";
}

Image read_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::MissingFile, "cannot open " + path.string());
    std::array<char, 8> sig{};
    in.read(sig.data(), sig.size());
    if (in.gcount() >= 2 && sig[0] == 'P' && (sig[1] == '5' || sig[1] == '6')) return read_pnm(path);
    if (in.gcount() == 8 && png_sig_cmp(reinterpret_cast<png_const_bytep>(sig.data()), 0, 8) == 0)
        return read_png(path);
    throw Error(ErrorCode::Malformed, "unsupported image format: " + path.string());
}

Image read_pnm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::MissingFile, "cannot open " + path.string());
    char magic[2] = {};
    in.read(magic, 2);
    if (in.gcount() != 2 || magic[0] != 'P' || (magic[1] != '5' && magic[1] != '6'))
        throw Error(ErrorCode::Malformed, "not a binary PGM/PPM file: " + path.string());
    Image img;
    img.channels = magic[1] == '5' ? 1 : 3;
    img.width = read_header_int(in, path);
    img.height = read_header_int(in, path);
    const int maxval = read_header_int(in, path);
    if (img.width <= 0 || img.height <= 0 || maxval != 255)
        throw Error(ErrorCode::Malformed, "unsupported Netpbm geometry/maxval in " + path.string());
    img.data.resize(static_cast<std::size_t>(img.width) * img.height * img.channels);
    in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
    if (static_cast<std::size_t>(in.gcount()) != img.data.size())
        throw Error(ErrorCode::Malformed, "truncated raster in " + path.string());
    if (in.peek() != EOF) throw Error(ErrorCode::Malformed, "trailing bytes in " + path.string());
    return img;
}

void write_pnm(const std::filesystem::path& path, const Image& image) {
    if (image.channels != 1 && image.channels != 3)
        throw Error(ErrorCode::InvalidArgument, "Netpbm output needs 1 or 3 channels");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << (image.channels == 1 ? "P5" : "P6") << '\n'
        << image.width << ' ' << image.height << '\n'
        << 255 << '\n';
    out.write(reinterpret_cast<const char*>(image.data.data()),
              static_cast<std::streamsize>(image.data.size()));
    if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

Image read_png(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw Error(ErrorCode::MissingFile, "cannot open " + path.string());
    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&png, path.c_str()))
        throw Error(ErrorCode::Malformed, "cannot decode PNG " + path.string() + ": " + png.message);
    Image img;
    img.width = static_cast<int>(png.width);
    img.height = static_cast<int>(png.height);
    const bool color = (png.format & PNG_FORMAT_FLAG_COLOR) != 0;
    img.channels = color ? 3 : 1;
    png.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    img.data.resize(PNG_IMAGE_SIZE(png));
    if (!png_image_finish_read(&png, nullptr, img.data.data(), 0, nullptr)) {
        std::string msg = png.message;
        png_image_free(&png);
        throw Error(ErrorCode::Malformed, "cannot decode PNG " + path.string() + ": " + msg);
    }
    return img;
}

void write_png(const std::filesystem::path& path, const Image& image) {
    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(image.width);
    png.height = static_cast<png_uint_32>(image.height);
    png.format = image.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&png, path.c_str(), 0, image.data.data(), 0, nullptr))
        throw Error(ErrorCode::IoError, "cannot write PNG " + path.string() + ": " + png.message);
}

}  // namespace mprof
