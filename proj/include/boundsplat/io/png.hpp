#pragma once

#include "boundsplat/core/errors.hpp"
#include "boundsplat/core/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

namespace boundsplat::io {

/// 8-bit PNG, RGB or RGBA (channels 3 or 4), values clamped to [0, 1].
inline void save_png(const std::string& path, const Image& img) {
    if (img.channels != 3 && img.channels != 4) throw ValidationError("save_png: need 3 or 4 channels");
    if (img.width <= 0 || img.height <= 0) throw ValidationError("save_png: empty image");
    std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
    if (!fp) throw Error("cannot open '" + path + "' for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw Error("save_png: libpng initialization failed");
    }
    std::vector<png_byte> rows(img.data.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        rows[i] = static_cast<png_byte>(std::lround(255.0 * std::clamp(img.data[i], 0.0, 1.0)));
    std::vector<png_bytep> ptrs(img.height);
    for (int y = 0; y < img.height; ++y) ptrs[y] = rows.data() + static_cast<std::size_t>(y) * img.width * img.channels;

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error("save_png: libpng failed writing '" + path + "'");
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, img.width, img.height, 8, img.channels == 4 ? PNG_COLOR_TYPE_RGBA : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, ptrs.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

/// Reads any PNG libpng understands, converted to 8-bit RGB or RGBA.
inline Image load_png(const std::string& path) {
    png_image im{};
    im.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&im, path.c_str()))
        throw ParseError("cannot read PNG '" + path + "': " + im.message, 0);
    const bool alpha = (im.format & PNG_FORMAT_FLAG_ALPHA) != 0;
    im.format = alpha ? PNG_FORMAT_RGBA : PNG_FORMAT_RGB;
    std::vector<png_byte> buf(PNG_IMAGE_SIZE(im));
    if (!png_image_finish_read(&im, nullptr, buf.data(), 0, nullptr)) {
        png_image_free(&im);
        throw ParseError("cannot decode PNG '" + path + "': " + im.message, 0);
    }
    Image img(static_cast<int>(im.width), static_cast<int>(im.height), alpha ? 4 : 3);
    for (std::size_t i = 0; i < buf.size(); ++i) img.data[i] = buf[i] / 255.0;
    return img;
}

/// Frames side by side, left to right.
inline Image horizontal_strip(const std::vector<Image>& frames) {
    if (frames.empty()) throw ValidationError("horizontal_strip: no frames");
    const Image& f0 = frames.front();
    Image out(f0.width * static_cast<int>(frames.size()), f0.height, f0.channels);
    for (std::size_t f = 0; f < frames.size(); ++f) {
        require_same_shape(frames[f], f0, "horizontal_strip");
        for (int y = 0; y < f0.height; ++y)
            for (int x = 0; x < f0.width; ++x)
                for (int c = 0; c < f0.channels; ++c)
                    out.at(static_cast<int>(f) * f0.width + x, y, c) = frames[f].at(x, y, c);
    }
    return out;
}

} // namespace boundsplat::io
