#pragma once

#include <png.h>

#include <cstdio>
#include <string>
#include <vector>

#include "genusforge/core.hpp"

namespace genusforge {

/// Row-major image with `channels` interleaved doubles per pixel.
struct Image {
    int width = 0, height = 0, channels = 1;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h, int c) : width(w), height(h), channels(c), data(std::size_t(w) * h * c, 0.0) {}

    double& at(int x, int y, int c = 0) { return data[(std::size_t(y) * width + x) * channels + c]; }
    double at(int x, int y, int c = 0) const { return data[(std::size_t(y) * width + x) * channels + c]; }
};

namespace detail {

struct PngCloser {
    std::FILE* fp = nullptr;
    ~PngCloser() { if (fp) std::fclose(fp); }
};

}  // namespace detail

/// 8-bit PNG write; grayscale for 1-channel images, RGB for 3-channel.
/// Values are clamped to [0,1] and quantized with round-to-nearest.
inline void save_png(const Image& img, const std::string& path) {
    if (img.channels != 1 && img.channels != 3) fail("IoError", "PNG export needs 1 or 3 channels");
    detail::PngCloser file{std::fopen(path.c_str(), "wb")};
    if (!file.fp) fail("IoError", "cannot open " + path + " for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail("IoError", "libpng failure writing " + path);
    }
    png_init_io(png, file.fp);
    png_set_IHDR(png, info, img.width, img.height, 8,
                 img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_byte> row(std::size_t(img.width) * img.channels);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c) {
                double v = std::clamp(img.at(x, y, c), 0.0, 1.0);
                row[std::size_t(x) * img.channels + c] = png_byte(std::lround(v * 255.0));
            }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

inline Image load_png(const std::string& path) {
    detail::PngCloser file{std::fopen(path.c_str(), "rb")};
    if (!file.fp) fail("IoError", "cannot open " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail("IoError", "libpng failure reading " + path);
    }
    png_init_io(png, file.fp);
    png_read_info(png, info);
    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);
    int width = int(png_get_image_width(png, info));
    int height = int(png_get_image_height(png, info));
    int channels = int(png_get_channels(png, info));
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail("IoError", "unsupported PNG channel count in " + path);
    }
    Image img(width, height, channels);
    std::vector<png_byte> row(std::size_t(width) * channels);
    for (int y = 0; y < height; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (int x = 0; x < width; ++x)
            for (int c = 0; c < channels; ++c)
                img.at(x, y, c) = row[std::size_t(x) * channels + c] / 255.0;
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

}  // namespace genusforge
