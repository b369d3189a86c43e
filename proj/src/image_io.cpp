#include "aiacr/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>

namespace aiacr {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

File open_file(const std::filesystem::path& path, const char* mode) {
    File f(std::fopen(path.c_str(), mode));
    if (!f) fail(ErrorCode::IoError, "cannot open " + path.string());
    return f;
}

void write_gray(const std::filesystem::path& path, Shape shape, int bit_depth, const std::vector<png_byte>& rows) {
    File f = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        fail(ErrorCode::IoError, "libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail(ErrorCode::IoError, "png write failed: " + path.string());
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(shape.width), static_cast<png_uint_32>(shape.height), bit_depth,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t stride = static_cast<std::size_t>(shape.width) * (bit_depth / 8);
    for (int r = 0; r < shape.height; ++r) png_write_row(png, rows.data() + r * stride);
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

// Returns samples widened to 16 bits (8-bit input is left unscaled).
std::vector<std::uint16_t> read_gray(const std::filesystem::path& path, Shape& shape, int& bit_depth) {
    File f = open_file(path, "rb");
    png_byte sig[8];
    if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
        fail(ErrorCode::UnsupportedFormat, "not a PNG file: " + path.string());
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        fail(ErrorCode::IoError, "libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(ErrorCode::CorruptHeader, "png read failed: " + path.string());
    }
    png_init_io(png, f.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    bit_depth = png_get_bit_depth(png, info);
    if (color != PNG_COLOR_TYPE_GRAY || (bit_depth != 8 && bit_depth != 16)) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(ErrorCode::UnsupportedFormat, "expected 8- or 16-bit grayscale PNG: " + path.string());
    }
    shape = {static_cast<int>(png_get_image_height(png, info)), static_cast<int>(png_get_image_width(png, info))};
    const std::size_t stride = png_get_rowbytes(png, info);
    std::vector<png_byte> row(stride);
    std::vector<std::uint16_t> out(shape.area());
    for (int r = 0; r < shape.height; ++r) {
        png_read_row(png, row.data(), nullptr);
        for (int c = 0; c < shape.width; ++c) {
            out[static_cast<std::size_t>(r) * shape.width + c] =
                bit_depth == 16 ? static_cast<std::uint16_t>((row[2 * c] << 8) | row[2 * c + 1]) : row[c];
        }
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

}  // namespace

double quantize16(double v) { return std::round(std::clamp(v, 0.0, 1.0) * 65535.0) / 65535.0; }

void write_image_png(const std::filesystem::path& path, const Grid<double>& image) {
    std::vector<png_byte> rows(image.size() * 2);
    for (std::size_t i = 0; i < image.size(); ++i) {
        const double v = image.values()[i];
        if (!(v >= 0.0 && v <= 1.0)) fail(ErrorCode::InvalidArgument, "image values must lie in [0, 1]");
        const auto q = static_cast<std::uint16_t>(std::lround(v * 65535.0));
        rows[2 * i] = static_cast<png_byte>(q >> 8);
        rows[2 * i + 1] = static_cast<png_byte>(q & 0xff);
    }
    write_gray(path, image.shape(), 16, rows);
}

Grid<double> read_image_png(const std::filesystem::path& path) {
    Shape shape;
    int depth = 0;
    const auto raw = read_gray(path, shape, depth);
    const double scale = depth == 16 ? 65535.0 : 255.0;
    Grid<double> image(shape);
    for (std::size_t i = 0; i < raw.size(); ++i) image.values()[i] = raw[i] / scale;
    return image;
}

void write_mask_png(const std::filesystem::path& path, const BinaryMask& mask) {
    std::vector<png_byte> rows(mask.shape().area());
    for (int r = 0; r < mask.shape().height; ++r) {
        for (int c = 0; c < mask.shape().width; ++c) {
            rows[static_cast<std::size_t>(r) * mask.shape().width + c] = mask(r, c) ? 255 : 0;
        }
    }
    write_gray(path, mask.shape(), 8, rows);
}

BinaryMask read_mask_png(const std::filesystem::path& path) {
    Shape shape;
    int depth = 0;
    const auto raw = read_gray(path, shape, depth);
    BinaryMask mask(shape);
    for (int r = 0; r < shape.height; ++r) {
        for (int c = 0; c < shape.width; ++c) mask.set(r, c, raw[static_cast<std::size_t>(r) * shape.width + c] != 0);
    }
    return mask;
}

}  // namespace aiacr
