#include "lungseg/png_io.hpp"

#include <png.h>

#include <array>
#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "lungseg/errors.hpp"

namespace lungseg::io {

namespace fs = std::filesystem;

RasterFormat sniff_format(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileMissing(path.string());
    std::array<unsigned char, 8> magic{};
    in.read(reinterpret_cast<char*>(magic.data()), magic.size());
    const auto got = in.gcount();
    static constexpr std::array<unsigned char, 8> png_sig{0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
    if (got == 8 && magic == png_sig) return RasterFormat::Png;
    if (got >= 3 && magic[0] == 'P' && magic[1] == '5' && std::isspace(magic[2])) return RasterFormat::Pgm;
    return RasterFormat::Unknown;
}

Raster8 read_png_gray(const fs::path& path) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
        throw DecodeError(path.string() + ": " + image.message);
    }
    image.format = PNG_FORMAT_GRAY;
    Raster8 out;
    out.width = static_cast<int>(image.width);
    out.height = static_cast<int>(image.height);
    out.channels = 1;
    out.pixels.resize(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
        std::string msg = image.message;
        png_image_free(&image);
        throw DecodeError(path.string() + ": " + msg);
    }
    return out;
}

namespace {

// Reads the next header token of a netpbm file, skipping '#' comments.
bool next_token(const std::string& buf, std::size_t& pos, std::string& tok) {
    tok.clear();
    while (pos < buf.size()) {
        const char c = buf[pos];
        if (c == '#') {
            while (pos < buf.size() && buf[pos] != '\n') ++pos;
        } else if (std::isspace(static_cast<unsigned char>(c))) {
            ++pos;
        } else {
            break;
        }
    }
    while (pos < buf.size() && !std::isspace(static_cast<unsigned char>(buf[pos]))) tok.push_back(buf[pos++]);
    return !tok.empty();
}

int parse_positive(const std::string& tok, const fs::path& path) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(tok, &used);
        if (used != tok.size() || v <= 0) throw DecodeError(path.string() + ": bad header field '" + tok + "'");
        return v;
    } catch (const std::logic_error&) {
        throw DecodeError(path.string() + ": bad header field '" + tok + "'");
    }
}

}  // namespace

Raster8 read_pgm(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileMissing(path.string());
    const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    std::size_t pos = 0;
    std::string tok;
    if (!next_token(buf, pos, tok) || tok != "P5") throw DecodeError(path.string() + ": not a P5 PGM");
    std::array<int, 3> fields{};
    for (auto& f : fields) {
        if (!next_token(buf, pos, tok)) throw DecodeError(path.string() + ": truncated header");
        f = parse_positive(tok, path);
    }
    const auto [w, h, maxval] = fields;
    if (maxval > 65535) throw DecodeError(path.string() + ": maxval out of range");
    ++pos;  // single whitespace byte before the raster

    const std::size_t bpp = maxval > 255 ? 2 : 1;
    const std::size_t n = static_cast<std::size_t>(w) * h;
    if (pos > buf.size() || buf.size() - pos < n * bpp) throw DecodeError(path.string() + ": truncated raster");

    Raster8 out{w, h, 1, std::vector<std::uint8_t>(n)};
    const auto* p = reinterpret_cast<const unsigned char*>(buf.data() + pos);
    for (std::size_t i = 0; i < n; ++i) {
        unsigned v = bpp == 2 ? (static_cast<unsigned>(p[2 * i]) << 8) | p[2 * i + 1] : p[i];
        // rounded rescale to 0..255
        out.pixels[i] = static_cast<std::uint8_t>((v * 255u + static_cast<unsigned>(maxval) / 2) / maxval);
    }
    return out;
}

void write_png(const Raster8& raster, const fs::path& path) {
    if (raster.channels != 1 && raster.channels != 3) throw WriteError(path.string() + ": unsupported channel count");
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(raster.width);
    image.height = static_cast<png_uint_32>(raster.height);
    image.format = raster.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&image, path.string().c_str(), 0, raster.pixels.data(), 0, nullptr)) {
        std::string msg = image.message;
        png_image_free(&image);
        throw WriteError(path.string() + ": " + msg);
    }
}

}  // namespace lungseg::io
