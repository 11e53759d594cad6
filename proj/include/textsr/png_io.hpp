#ifndef TEXTSR_PNG_IO_HPP
#define TEXTSR_PNG_IO_HPP

#include <png.h>

#include <cstdio>
#include <memory>
#include <string>

#include "image.hpp"

namespace textsr {
namespace img {

// 8-bit PNG I/O. Grayscale for C=1, RGB for C=3.
inline void write_png(const std::string& path, const Image& x) {
    check_image(x, "write_png");
    int64_t C = x.size(0), H = x.size(1), W = x.size(2);
    if (C != 1 && C != 3) throw ShapeError("write_png: channels must be 1 or 3");
    std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), std::fclose);
    if (!fp) throw DataError("write_png: cannot open " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw DataError("write_png: libpng failure for " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(W), static_cast<png_uint_32>(H), 8,
                 C == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_byte> row(W * C);
    for (int64_t h = 0; h < H; h++) {
        for (int64_t w = 0; w < W; w++)
            for (int64_t c = 0; c < C; c++) {
                float v = clamp01(x[(c * H + h) * W + w]);
                row[w * C + c] = static_cast<png_byte>(std::lround(v * 255.f));
            }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

inline Image read_png(const std::string& path) {
    std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "rb"), std::fclose);
    if (!fp) throw DataError("read_png: cannot open " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("read_png: libpng failure for " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    png_uint_32 w = png_get_image_width(png, info);
    png_uint_32 h = png_get_image_height(png, info);
    int color = png_get_color_type(png, info);
    int depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);
    int64_t C = png_get_channels(png, info);
    Image out({C, static_cast<int64_t>(h), static_cast<int64_t>(w)});
    std::vector<png_byte> row(w * C);
    for (png_uint_32 y = 0; y < h; y++) {
        png_read_row(png, row.data(), nullptr);
        for (png_uint_32 x2 = 0; x2 < w; x2++)
            for (int64_t c = 0; c < C; c++)
                out[(c * h + y) * w + x2] = static_cast<float>(row[x2 * C + c]) / 255.f;
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

}  // namespace img
}  // namespace textsr

#endif  // TEXTSR_PNG_IO_HPP
