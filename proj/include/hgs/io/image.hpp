// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "hgs/core/tensor.hpp"

#include <csetjmp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <png.h>

namespace hgs::io {

/// [H,W,3] float image in [0,1] -> 8-bit RGB PNG.
template <class T>
void write_png(const std::filesystem::path& path, const Tensor<T>& image) {
    check(image.defined() && image.rank() == 3 && image.shape()[2] == 3,
          "write_png: image must be [H,W,3]");
    const int64_t h = image.shape()[0], w = image.shape()[1];
    std::vector<uint8_t> bytes(size_t(h * w * 3));
    const T* p = image.ptr();
    for (int64_t i = 0; i < h * w * 3; ++i) {
        double v = std::clamp(double(p[i]), 0.0, 1.0);
        bytes[size_t(i)] = uint8_t(std::lround(v * 255.0));
    }

    FILE* fp = std::fopen(path.string().c_str(), "wb");
    check(fp != nullptr, "write_png: cannot open ", path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw Error(cat("write_png: libpng failure for ", path.string()));
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, png_uint_32(w), png_uint_32(h), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int64_t y = 0; y < h; ++y)
        png_write_row(png, const_cast<png_bytep>(bytes.data() + y * w * 3));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

/// 8-bit RGB PNG -> [H,W,3] float image in [0,1]. Grayscale and palette
/// inputs are expanded to RGB; an alpha channel is dropped.
template <class T>
Tensor<T> read_png(const std::filesystem::path& path) {
    FILE* fp = std::fopen(path.string().c_str(), "rb");
    check(fp != nullptr, "read_png: cannot open ", path.string());
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw Error(cat("read_png: malformed PNG: ", path.string()));
    }
    png_init_io(png, fp);
    png_read_info(png, info);
    png_uint_32 w = png_get_image_width(png, info);
    png_uint_32 h = png_get_image_height(png, info);
    png_byte color = png_get_color_type(png, info);
    png_byte depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);
    std::vector<uint8_t> bytes(size_t(w) * h * 3);
    for (png_uint_32 y = 0; y < h; ++y) png_read_row(png, bytes.data() + size_t(y) * w * 3, nullptr);
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);

    Tensor<T> img = Tensor<T>::zeros({int64_t(h), int64_t(w), 3});
    T* p = img.ptr();
    for (size_t i = 0; i < bytes.size(); ++i) p[i] = T(bytes[i] / 255.0);
    return img;
}

/// Lossless float image: one text header line "RAWF1 <w> <h> <c>\n" followed
/// by little-endian float32 planes, channel-major.
template <class T>
void write_rawf(const std::filesystem::path& path, const Tensor<T>& image) {
    check(image.defined() && (image.rank() == 2 || image.rank() == 3),
          "write_rawf: [H,W] or [H,W,C] expected");
    int64_t h = image.shape()[0], w = image.shape()[1];
    int64_t c = image.rank() == 3 ? image.shape()[2] : 1;
    std::ofstream f(path, std::ios::binary);
    check(f.good(), "write_rawf: cannot open ", path.string());
    f << "RAWF1 " << w << " " << h << " " << c << "\n";
    const T* p = image.ptr();
    for (int64_t ch = 0; ch < c; ++ch)
        for (int64_t i = 0; i < h * w; ++i) {
            float v = float(p[i * c + ch]);
            f.write(reinterpret_cast<const char*>(&v), 4);
        }
    check(f.good(), "write_rawf: write failed for ", path.string());
}

template <class T>
Tensor<T> read_rawf(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    check(f.good(), "read_rawf: cannot open ", path.string());
    std::string magic;
    int64_t w = 0, h = 0, c = 0;
    f >> magic >> w >> h >> c;
    check(magic == "RAWF1", "read_rawf: bad magic in ", path.string());
    check(w > 0 && h > 0 && c > 0, "read_rawf: bad extents in ", path.string());
    f.get(); // newline
    Tensor<T> img = c == 1 ? Tensor<T>::zeros({h, w}) : Tensor<T>::zeros({h, w, c});
    T* p = img.ptr();
    for (int64_t ch = 0; ch < c; ++ch)
        for (int64_t i = 0; i < h * w; ++i) {
            float v;
            f.read(reinterpret_cast<char*>(&v), 4);
            p[i * c + ch] = T(v);
        }
    check(f.good(), "read_rawf: truncated file ", path.string());
    return img;
}

} // namespace hgs::io
