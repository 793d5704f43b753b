#pragma once

#include "boundsplat/core/errors.hpp"
#include "boundsplat/core/math.hpp"

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

namespace boundsplat {

/// Row-major H x W x C image of doubles.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 3;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h, int c = 3, double fill = 0.0)
        : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

    std::size_t index(int x, int y, int c = 0) const {
        return (static_cast<std::size_t>(y) * width + x) * channels + c;
    }
    double& at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
    double at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
    std::size_t size() const { return data.size(); }
    bool same_shape(const Image& o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }
};

inline void require_same_shape(const Image& a, const Image& b, const char* what) {
    if (!a.same_shape(b)) {
        throw ValidationError(std::string(what) + ": image shape mismatch (" + std::to_string(a.width) + "x" +
                              std::to_string(a.height) + "x" + std::to_string(a.channels) + " vs " +
                              std::to_string(b.width) + "x" + std::to_string(b.height) + "x" +
                              std::to_string(b.channels) + ")");
    }
}

/// Box-filter downsample by an integer factor (area average).
inline Image downsample_area(const Image& src, int factor) {
    if (factor <= 0 || src.width % factor != 0 || src.height % factor != 0) {
        throw ValidationError("downsample_area: factor must evenly divide the image size");
    }
    if (factor == 1) return src;
    Image dst(src.width / factor, src.height / factor, src.channels);
    const double inv = 1.0 / (factor * factor);
    for (int y = 0; y < dst.height; ++y)
        for (int x = 0; x < dst.width; ++x)
            for (int c = 0; c < src.channels; ++c) {
                double acc = 0.0;
                for (int dy = 0; dy < factor; ++dy)
                    for (int dx = 0; dx < factor; ++dx) acc += src.at(x * factor + dx, y * factor + dy, c);
                dst.at(x, y, c) = acc * inv;
            }
    return dst;
}

/// Exact transpose of downsample_area: spreads each coarse gradient over its block.
inline Image downsample_area_transpose(const Image& grad, int factor) {
    if (factor == 1) return grad;
    Image dst(grad.width * factor, grad.height * factor, grad.channels);
    const double inv = 1.0 / (factor * factor);
    for (int y = 0; y < dst.height; ++y)
        for (int x = 0; x < dst.width; ++x)
            for (int c = 0; c < grad.channels; ++c) dst.at(x, y, c) = grad.at(x / factor, y / factor, c) * inv;
    return dst;
}

inline double mean_squared_error(const Image& a, const Image& b) {
    require_same_shape(a, b, "mean_squared_error");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        acc += d * d;
    }
    return a.data.empty() ? 0.0 : acc / static_cast<double>(a.data.size());
}

/// PSNR in dB for images with unit peak value.
inline double psnr(const Image& a, const Image& b) {
    const double mse = mean_squared_error(a, b);
    if (mse <= 0.0) return std::numeric_limits<double>::infinity();
    return -10.0 * std::log10(mse);
}

} // namespace boundsplat
