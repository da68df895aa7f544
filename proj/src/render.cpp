#include "cscn/render.hpp"

#include <algorithm>
#include <cmath>

#include <png.h>

#include "cscn/error.hpp"
#include "cscn/io.hpp"

namespace cscn {

Rgb palette_color(int label) {
    static constexpr std::array<Rgb, 16> kBase{{{0, 0, 0},
                                                {230, 25, 75},
                                                {60, 180, 75},
                                                {255, 225, 25},
                                                {0, 130, 200},
                                                {245, 130, 48},
                                                {145, 30, 180},
                                                {70, 240, 240},
                                                {240, 50, 230},
                                                {210, 245, 60},
                                                {250, 190, 212},
                                                {0, 128, 128},
                                                {220, 190, 255},
                                                {170, 110, 40},
                                                {255, 250, 200},
                                                {128, 0, 0}}};
    if (label >= 0 && label < static_cast<int>(kBase.size())) return kBase[label];
    // Golden-ratio hue walk for the rest.
    const double h = std::fmod(label * 0.618033988749895, 1.0) * 6.0;
    const double x = 1.0 - std::fabs(std::fmod(h, 2.0) - 1.0);
    double r = 0, g = 0, b = 0;
    switch (static_cast<int>(h)) {
        case 0: r = 1; g = x; break;
        case 1: r = x; g = 1; break;
        case 2: g = 1; b = x; break;
        case 3: g = x; b = 1; break;
        case 4: r = x; b = 1; break;
        default: r = 1; b = x; break;
    }
    auto q = [](double v) { return static_cast<std::uint8_t>(std::lround(60 + 195 * v)); };
    return {q(r), q(g), q(b)};
}

namespace {

std::string encode_png(const std::vector<std::uint8_t>& pixels, int height, int width, int color_type, int channels) {
    if (height < 1 || width < 1) throw InvalidArgument("image dims must be positive");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (png == nullptr) throw IoError("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (info == nullptr) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("png_create_info_struct failed");
    }
    std::string out;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng failed while encoding");
    }
    png_set_write_fn(
        png, &out,
        [](png_structp p, png_bytep data, png_size_t len) {
            static_cast<std::string*>(png_get_io_ptr(p))->append(reinterpret_cast<const char*>(data), len);
        },
        nullptr);
    png_set_IHDR(png, info, width, height, 8, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int r = 0; r < height; ++r) {
        png_write_row(png, const_cast<png_bytep>(pixels.data() + static_cast<std::size_t>(r) * width * channels));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

}  // namespace

std::string encode_label_png(const std::vector<std::uint16_t>& labels, int height, int width) {
    if (labels.size() != static_cast<std::size_t>(height) * width) throw ShapeMismatch("label raster size mismatch");
    std::vector<std::uint8_t> rgb(labels.size() * 3);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto c = palette_color(labels[i]);
        std::copy(c.begin(), c.end(), rgb.begin() + 3 * i);
    }
    return encode_png(rgb, height, width, PNG_COLOR_TYPE_RGB, 3);
}

std::string encode_gray_png(const std::vector<float>& values, int height, int width) {
    if (values.size() != static_cast<std::size_t>(height) * width) throw ShapeMismatch("weight map size mismatch");
    std::vector<std::uint8_t> gray(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const float v = std::isfinite(values[i]) ? std::clamp(values[i], 0.0f, 1.0f) : 0.0f;
        gray[i] = static_cast<std::uint8_t>(std::lround(255.0 * v));
    }
    return encode_png(gray, height, width, PNG_COLOR_TYPE_GRAY, 1);
}

void render_labels(const std::vector<std::uint16_t>& labels, int height, int width, const std::filesystem::path& out) {
    write_file_atomic(out, encode_label_png(labels, height, width));
}

void render_weights(const std::vector<float>& values, int height, int width, const std::filesystem::path& out) {
    write_file_atomic(out, encode_gray_png(values, height, width));
}

}  // namespace cscn
