#include "lungseg/imgio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include "lungseg/errors.hpp"

namespace lungseg::io {

namespace fs = std::filesystem;

GrayImage decode_jsrt_raw(const std::vector<std::uint8_t>& bytes, const RawOptions& opts) {
    if (opts.width <= 0 || opts.height <= 0) throw ZeroDimension("raw dimensions must be positive");
    const std::size_t n = static_cast<std::size_t>(opts.width) * opts.height;
    if (bytes.size() != n * 2) throw SizeMismatch(n * 2, bytes.size());

    GrayImage img(opts.width, opts.height);
    for (std::size_t i = 0; i < n; ++i) {
        unsigned word = (static_cast<unsigned>(bytes[2 * i]) << 8) | bytes[2 * i + 1];
        word = std::min<unsigned>(word, kJsrtMaxValue);
        float v = static_cast<float>(word) / static_cast<float>(kJsrtMaxValue);
        img.data[i] = opts.invert ? 1.0f - v : v;
    }
    return img;
}

GrayImage read_jsrt_raw(const fs::path& path, const RawOptions& opts) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileMissing(path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_jsrt_raw(bytes, opts);
}

std::vector<std::uint8_t> encode_jsrt_raw(const GrayImage& img, bool invert) {
    std::vector<std::uint8_t> out(img.size() * 2);
    for (std::size_t i = 0; i < img.size(); ++i) {
        double v = std::clamp(static_cast<double>(img.data[i]), 0.0, 1.0);
        if (invert) v = 1.0 - v;
        const auto word = static_cast<std::uint16_t>(std::lround(v * kJsrtMaxValue));
        out[2 * i] = static_cast<std::uint8_t>(word >> 8);
        out[2 * i + 1] = static_cast<std::uint8_t>(word & 0xFF);
    }
    return out;
}

void write_jsrt_raw(const GrayImage& img, const fs::path& path, bool invert) {
    const auto bytes = encode_jsrt_raw(img, invert);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw WriteError(path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw WriteError(path.string());
}

namespace {

Raster8 read_raster(const fs::path& path) {
    switch (sniff_format(path)) {
        case RasterFormat::Png: return read_png_gray(path);
        case RasterFormat::Pgm: return read_pgm(path);
        case RasterFormat::Unknown: break;
    }
    throw UnsupportedFormat(path.string() + ": expected PNG or binary PGM");
}

}  // namespace

BinaryMask read_mask(const fs::path& path) {
    const Raster8 r = read_raster(path);
    BinaryMask m(r.width, r.height);
    for (std::size_t i = 0; i < m.size(); ++i) m.data[i] = r.pixels[i] > 127 ? 1 : 0;
    return m;
}

GrayImage read_gray(const fs::path& path) {
    const Raster8 r = read_raster(path);
    GrayImage img(r.width, r.height);
    for (std::size_t i = 0; i < img.size(); ++i) img.data[i] = static_cast<float>(r.pixels[i]) / 255.0f;
    return img;
}

void write_mask_png(const BinaryMask& mask, const fs::path& path) {
    Raster8 r{mask.width, mask.height, 1, std::vector<std::uint8_t>(mask.size())};
    for (std::size_t i = 0; i < mask.size(); ++i) r.pixels[i] = mask.data[i] ? 255 : 0;
    write_png(r, path);
}

void write_gray_png(const GrayImage& img, const fs::path& path) {
    Raster8 r{img.width, img.height, 1, std::vector<std::uint8_t>(img.size())};
    for (std::size_t i = 0; i < img.size(); ++i) {
        r.pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(img.data[i], 0.0f, 1.0f) * 255.0f));
    }
    write_png(r, path);
}

namespace {

// Source coordinate of output pixel center `d` (align_corners = false).
double source_coord(int d, int in, int out) {
    return (static_cast<double>(d) + 0.5) * static_cast<double>(in) / static_cast<double>(out) - 0.5;
}

int nearest_index(double s, int in) {
    // round half toward the smaller index
    const int i = static_cast<int>(std::ceil(s - 0.5));
    return std::clamp(i, 0, in - 1);
}

}  // namespace

GrayImage resize_bilinear(const GrayImage& img, int out_w, int out_h) {
    if (out_w < 1 || out_h < 1) throw ZeroDimension("resize target must be at least 1x1");
    if (img.empty()) throw ZeroDimension("resize source is empty");

    std::vector<int> x0(out_w), x1(out_w);
    std::vector<double> fx(out_w);
    for (int x = 0; x < out_w; ++x) {
        const double s = std::clamp(source_coord(x, img.width, out_w), 0.0, static_cast<double>(img.width - 1));
        x0[x] = static_cast<int>(std::floor(s));
        x1[x] = std::min(x0[x] + 1, img.width - 1);
        fx[x] = s - x0[x];
    }

    GrayImage out(out_w, out_h);
    for (int y = 0; y < out_h; ++y) {
        const double s = std::clamp(source_coord(y, img.height, out_h), 0.0, static_cast<double>(img.height - 1));
        const int y0 = static_cast<int>(std::floor(s));
        const int y1 = std::min(y0 + 1, img.height - 1);
        const double fy = s - y0;
        for (int x = 0; x < out_w; ++x) {
            const double a = img.at(x0[x], y0), b = img.at(x1[x], y0);
            const double c = img.at(x0[x], y1), d = img.at(x1[x], y1);
            const double top = a + fx[x] * (b - a);
            const double bottom = c + fx[x] * (d - c);
            out.at(x, y) = static_cast<float>(top + fy * (bottom - top));
        }
    }
    return out;
}

BinaryMask resize_nearest(const BinaryMask& mask, int out_w, int out_h) {
    if (out_w < 1 || out_h < 1) throw ZeroDimension("resize target must be at least 1x1");
    if (mask.empty()) throw ZeroDimension("resize source is empty");

    std::vector<int> xs(out_w);
    for (int x = 0; x < out_w; ++x) xs[x] = nearest_index(source_coord(x, mask.width, out_w), mask.width);

    BinaryMask out(out_w, out_h);
    for (int y = 0; y < out_h; ++y) {
        const int sy = nearest_index(source_coord(y, mask.height, out_h), mask.height);
        for (int x = 0; x < out_w; ++x) out.set(x, y, mask.at(xs[x], sy));
    }
    return out;
}

Raster8 render_overlay_panel(const GrayImage& img, const BinaryMask& predicted, const BinaryMask& truth,
                             const OverlayStyle& style) {
    if (!same_dims(img, predicted) || !same_dims(img, truth)) {
        throw DimMismatch("overlay inputs must share dimensions");
    }
    const int w = img.width, h = img.height, g = std::max(0, style.gutter);
    Raster8 out;
    out.width = 4 * w + 3 * g;
    out.height = h;
    out.channels = 3;
    out.pixels.assign(static_cast<std::size_t>(out.width) * h * 3, style.gutter_value);

    auto put = [&](int panel, int x, int y, std::uint8_t r, std::uint8_t gr, std::uint8_t b) {
        const std::size_t i = (static_cast<std::size_t>(y) * out.width + panel * (w + g) + x) * 3;
        out.pixels[i] = r;
        out.pixels[i + 1] = gr;
        out.pixels[i + 2] = b;
    };

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const auto v = static_cast<std::uint8_t>(std::lround(std::clamp(img.at(x, y), 0.0f, 1.0f) * 255.0f));
            const bool p = predicted.at(x, y), t = truth.at(x, y);
            put(0, x, y, v, v, v);

            const std::uint8_t* hue = nullptr;
            if (p && t) hue = kAgreeRgb;
            else if (t) hue = kTruthOnlyRgb;
            else if (p) hue = kPredOnlyRgb;
            if (hue) put(1, x, y, hue[0], hue[1], hue[2]);
            else put(1, x, y, v / 2, v / 2, v / 2);  // dimmed anatomy under both-negative pixels

            const std::uint8_t pm = p ? 255 : 0;
            put(2, x, y, pm, pm, pm);
            const std::uint8_t diff = p != t ? 255 : 0;
            put(3, x, y, diff, diff, diff);
        }
    }
    return out;
}

void write_overlay_panel(const GrayImage& img, const BinaryMask& predicted, const BinaryMask& truth,
                         const fs::path& path, const OverlayStyle& style) {
    write_png(render_overlay_panel(img, predicted, truth, style), path);
}

}  // namespace lungseg::io
