#pragma once

#include <png.h>

#include <cstdio>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include "maskflow/errors.hpp"

namespace maskflow {

struct PngImage {
    int width = 0;
    int height = 0;
    int channels = 0;            // 1 = gray or palette index, 3 = rgb
    std::vector<uint8_t> pixels; // row-major, interleaved
    std::vector<uint8_t> palette; // rgb triples when reading indexed images
};

namespace detail {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

}  // namespace detail

inline void write_png(const std::string& path, int width, int height, int channels,
                      const uint8_t* pixels, const std::vector<uint8_t>& palette = {}) {
    detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IntegrityError("cannot open for writing: " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IntegrityError("libpng write failure: " + path);
    }
    png_init_io(png, fp.get());

    int color_type;
    if (!palette.empty()) color_type = PNG_COLOR_TYPE_PALETTE;
    else if (channels == 1) color_type = PNG_COLOR_TYPE_GRAY;
    else if (channels == 3) color_type = PNG_COLOR_TYPE_RGB;
    else throw ValidationError("write_png: unsupported channel count");

    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
                 color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    if (!palette.empty()) {
        std::vector<png_color> pal(palette.size() / 3);
        for (size_t i = 0; i < pal.size(); ++i) {
            pal[i].red = palette[3 * i];
            pal[i].green = palette[3 * i + 1];
            pal[i].blue = palette[3 * i + 2];
        }
        png_set_PLTE(png, info, pal.data(), static_cast<int>(pal.size()));
    }
    png_write_info(png, info);

    std::vector<png_bytep> rows(static_cast<size_t>(height));
    const size_t stride = static_cast<size_t>(width) * channels;
    for (int y = 0; y < height; ++y)
        rows[static_cast<size_t>(y)] = const_cast<png_bytep>(pixels + static_cast<size_t>(y) * stride);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

inline PngImage read_png(const std::string& path, bool keep_palette_indices = false) {
    detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IntegrityError("missing file: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IntegrityError("libpng read failure: " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    PngImage img;
    img.width = static_cast<int>(png_get_image_width(png, info));
    img.height = static_cast<int>(png_get_image_height(png, info));
    int color_type = png_get_color_type(png, info);
    int bit_depth = png_get_bit_depth(png, info);

    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) {
        if (keep_palette_indices) {
            if (bit_depth < 8) png_set_packing(png);
            png_colorp pal = nullptr;
            int n_pal = 0;
            png_get_PLTE(png, info, &pal, &n_pal);
            img.palette.resize(static_cast<size_t>(n_pal) * 3);
            for (int i = 0; i < n_pal; ++i) {
                img.palette[3 * static_cast<size_t>(i)] = pal[i].red;
                img.palette[3 * static_cast<size_t>(i) + 1] = pal[i].green;
                img.palette[3 * static_cast<size_t>(i) + 2] = pal[i].blue;
            }
        } else {
            png_set_palette_to_rgb(png);
        }
    }
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    img.channels = static_cast<int>(png_get_channels(png, info));
    const size_t stride = png_get_rowbytes(png, info);
    img.pixels.resize(stride * static_cast<size_t>(img.height));
    std::vector<png_bytep> rows(static_cast<size_t>(img.height));
    for (int y = 0; y < img.height; ++y)
        rows[static_cast<size_t>(y)] = img.pixels.data() + static_cast<size_t>(y) * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

}  // namespace maskflow
